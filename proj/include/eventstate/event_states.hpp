#pragma once

// Joint detector (and optionally timer) states for a pair of measurement
// events. Detector record states are embedded with the same kets as the
// measured basis, so a detector density matrix is written in the
// computational coordinates of C^dA (x) C^dB.

#include <cstddef>
#include <optional>
#include <vector>

#include "eventstate/quantum_core.hpp"
#include "eventstate/timing.hpp"

namespace eventstate {

struct TimingSpec {
    TimingProfile profile_a;
    /// Marginal for SL, conditional (on t_A) for TL.
    TimingProfile profile_b;
    /// Optional non-separable SL amplitude chi_SL(t_A, t_B) on the shared grid;
    /// overrides the product of the two profiles in the timed builder.
    std::optional<Eigen::MatrixXcd> joint_amplitude;

    const TimeGrid& grid() const { return profile_a.grid(); }
};

struct EventScenario {
    EventKind kind = EventKind::Timelike;
    /// State of S: dim d for TL, dA*dB for SL.
    DensityMatrix initial = DensityMatrix::maximally_mixed(2);
    MeasurementModel basis_a = MeasurementModel::named("Sz");
    MeasurementModel basis_b = MeasurementModel::named("Sz");
    /// TL: evolution between the two events. Unused for SL.
    Operator evolution = Operator::Identity(2, 2);
    /// SL: per-subsystem evolutions applied before the instantaneous measurements.
    std::optional<Operator> evolution_a;
    std::optional<Operator> evolution_b;
    std::optional<TimingSpec> timing;
    /// TL: H_S on S. SL uses hamiltonian_a / hamiltonian_b (separable evolution).
    std::optional<Operator> hamiltonian;
    std::optional<Operator> hamiltonian_a;
    std::optional<Operator> hamiltonian_b;

    static EventScenario timelike(const Ket& initial, MeasurementModel a, MeasurementModel b, Operator evolution);
    static EventScenario timelike(DensityMatrix initial, MeasurementModel a, MeasurementModel b, Operator evolution);
    static EventScenario spacelike(const Ket& initial, MeasurementModel a, MeasurementModel b);
    static EventScenario spacelike(DensityMatrix initial, MeasurementModel a, MeasurementModel b);

    Index dim_a() const { return basis_a.dim(); }
    Index dim_b() const { return basis_b.dim(); }
    /// Throws InvalidInput/DimensionMismatch on any inconsistency.
    void validate() const;
};

struct EventState {
    EventKind kind = EventKind::Timelike;
    DensityMatrix rho = DensityMatrix::maximally_mixed(4);
    MeasurementModel record_basis_a = MeasurementModel::named("Sz");
    MeasurementModel record_basis_b = MeasurementModel::named("Sz");
    /// 0 for detector-only states; otherwise the number of bins of each timer,
    /// with rho laid out over (T_A (x) D_A) (x) (T_B (x) D_B).
    std::size_t timer_bins = 0;

    bool timed() const { return timer_bins > 0; }
    Index dim_a() const { return record_basis_a.dim(); }
    Index dim_b() const { return record_basis_b.dim(); }
    /// V_A (x) V_B: columns are the joint record kets |alpha_A alpha_B>.
    Operator joint_record_basis() const;
};

/// rho expressed in the joint record basis (timers untouched).
Operator record_coordinates(const EventState& state);

EventState build_sl_instant(const EventScenario& scenario);
EventState build_tl_instant(const EventScenario& scenario);
/// Timer-traced TL state: timing-weighted Riemann sum over (t_A, t_B).
EventState build_tl_fuzzy(const EventScenario& scenario);
/// Timer-traced SL state for separable per-subsystem evolution.
EventState build_sl_fuzzy(const EventScenario& scenario);

/// Largest timed state accepted by build_timed_state.
constexpr std::size_t kMaxTimedBins = 8;
constexpr Index kMaxTimedDim = 256;

/// Full detector-timer state including timer coherences.
EventState build_timed_state(const EventScenario& scenario);
/// Traces both timers out of a timed state; detector-only states pass through.
EventState trace_timers(const EventState& state);
/// Timer populations p(t_k, t_l) of a timed state.
JointTimeDistribution time_distribution(const EventState& state, const TimeGrid& grid);

/// Picks the builder matching a scenario: instant without timing, fuzzy with
/// timing; `timed` selects build_timed_state.
EventState build_event_state(const EventScenario& scenario, bool timed = false);

struct ConditionalBranch {
    double probability = 0.0;
    /// Block trace below 1e-12: sigma is a placeholder and lambda is absent.
    bool omitted = false;
    DensityMatrix sigma = DensityMatrix::maximally_mixed(2);
    std::optional<Ket> lambda;
};

/// rho = sum_b p_b sigma_{A,b} (x) |b><b|, one branch per record outcome of B.
struct ConditionalDecomposition {
    EventKind kind = EventKind::Timelike;
    std::vector<ConditionalBranch> branches;
    MeasurementModel record_basis_a = MeasurementModel::named("Sz");
    MeasurementModel record_basis_b = MeasurementModel::named("Sz");
    /// Max entrywise |rho - sum_b p_b sigma_b (x) |b><b||.
    double reconstruction_error = 0.0;

    bool has_lambdas() const;
    Operator reconstruct() const;
};

ConditionalDecomposition conditional_decomposition(const EventState& state);

} // namespace eventstate
