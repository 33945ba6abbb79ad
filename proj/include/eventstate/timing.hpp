#pragma once

// Detection-time amplitudes on a uniform grid, the discrete branching model
// they come from, and joint detection-time distributions for two events.

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eventstate/quantum_core.hpp"

namespace eventstate {

enum class EventKind { Spacelike, Timelike };

std::string to_string(EventKind kind);       // "SL" / "TL"
EventKind event_kind_from_string(std::string_view s);

/// Grid points t_k = t0 + k dt, k = 0 .. n_bins-1.
struct TimeGrid {
    double t0 = 0.0;
    double dt = 1.0;
    std::size_t n_bins = 2;

    double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
    double last_time() const { return time(n_bins - 1); }
    /// Throws InvalidInput unless dt > 0 and n_bins >= 2.
    void validate() const;
    bool matches(const TimeGrid& other, double tol = 1e-12) const;
};

/// Upper limits on grid sizes: any grid, and grids carrying an n_bins x n_bins table.
constexpr std::size_t kMaxGridBins = 10'000'000;
constexpr std::size_t kMaxTableBins = 4096;

/// Smallest grid starting at t0 whose exponential tail beyond the last bin
/// carries less than `tail_mass`.
TimeGrid grid_for_exponential(double gamma, double dt, double tail_mass = 1e-6, double t0 = 0.0);

enum class ProfileKind { Marginal, Conditional };

/// Detection amplitude density chi on a grid. Marginal profiles hold chi(t_k);
/// conditional profiles hold chi(t_B = t_l | t_A = t_k) in row k, column l,
/// and are zero below the diagonal. Per-bin probability is |chi|^2 dt.
class TimingProfile {
public:
    static TimingProfile marginal(const TimeGrid& grid, Eigen::VectorXcd amplitudes);
    static TimingProfile conditional(const TimeGrid& grid, Eigen::MatrixXcd amplitudes);

    const TimeGrid& grid() const noexcept { return grid_; }
    ProfileKind kind() const noexcept { return kind_; }
    bool is_marginal() const noexcept { return kind_ == ProfileKind::Marginal; }

    /// n_bins x 1 for marginal, n_bins x n_bins for conditional.
    const Eigen::MatrixXcd& amplitudes() const noexcept { return amps_; }
    Complex amplitude(std::size_t k) const;
    Complex amplitude(std::size_t k, std::size_t l) const;

    /// |chi(t_k)|^2 dt (marginal only).
    Eigen::VectorXd bin_masses() const;
    /// Row k: |chi(t_l | t_k)|^2 dt (conditional only).
    Eigen::MatrixXd conditional_masses() const;

    /// Largest |mass - 1| over the profile (rows, for conditional).
    double normalization_defect() const;
    /// Rescales every nonzero row (or the marginal) to unit mass.
    TimingProfile normalized() const;

private:
    TimingProfile(TimeGrid grid, ProfileKind kind, Eigen::MatrixXcd amps);

    TimeGrid grid_;
    ProfileKind kind_;
    Eigen::MatrixXcd amps_;
};

struct ExponentialProfile {
    TimingProfile profile;
    double truncated_mass = 0.0; // exp(-gamma (t_end - t0)) before renormalization
    std::vector<std::string> warnings;
};

/// chi(t) = sqrt(gamma) exp(-gamma (t - t0) / 2), sampled and renormalized on the grid.
ExponentialProfile exponential_profile(double gamma, const TimeGrid& grid);

/// One-hot marginal: all mass in `bin`.
TimingProfile delta_profile(const TimeGrid& grid, std::size_t bin);

/// Exponential restarting at t_A: chi(t_l | t_k) = sqrt(gamma) exp(-gamma (t_l - t_k) / 2), l >= k,
/// each row renormalized on the remaining grid.
TimingProfile conditional_exponential_profile(double gamma, const TimeGrid& grid);

/// One-hot rows at l = min(k + lag_bins, n_bins - 1).
TimingProfile conditional_delta_profile(const TimeGrid& grid, std::size_t lag_bins);

/// Translation-invariant conditional chi(t_l | t_k) = kernel[l - k], rows renormalized
/// (rows near the grid end lose the part of the kernel that falls off).
TimingProfile conditional_from_kernel(const TimeGrid& grid, const Eigen::VectorXcd& kernel);

/// Per-step detection probabilities dp_k and undetected-branch phases phi_k.
struct BranchingSchedule {
    TimeGrid grid;
    std::vector<double> step_probs;
    std::vector<double> step_phases;

    static BranchingSchedule constant(const TimeGrid& grid, double dp);
    /// dp_k = gamma dt.
    static BranchingSchedule from_rate(double gamma, const TimeGrid& grid);

    void validate() const;
    /// Non-fatal notes, e.g. steps with dp > 0.1.
    std::vector<std::string> warnings() const;
};

/// sqrt(dp_k) prod_{l<k} sqrt(1 - dp_l) exp(i phi_l).
Complex branching_amplitude(const BranchingSchedule& schedule, std::size_t k);
Eigen::VectorXcd branching_amplitudes(const BranchingSchedule& schedule);
/// prod_k (1 - dp_k): probability of no detection on the whole grid.
double survival_probability(const BranchingSchedule& schedule);

struct ContinuumCheck {
    double max_relative_error = 0.0;
    std::size_t bins_compared = 0;
};

/// Compares |chi~_k|^2 / dt against |chi(t_k)|^2 over the bins where the
/// branching model's cumulative detection mass is still below 0.99.
ContinuumCheck continuum_limit_check(const BranchingSchedule& schedule, const TimingProfile& profile);

/// p(t_k, t_l): row = event A bin, column = event B bin.
struct JointTimeDistribution {
    TimeGrid grid;
    EventKind kind = EventKind::Spacelike;
    Eigen::MatrixXd p;

    double total() const { return p.sum(); }
    Eigen::VectorXd marginal_a() const { return p.rowwise().sum(); }
    Eigen::VectorXd marginal_b() const { return p.colwise().sum().transpose(); }
    Eigen::VectorXd times() const;
    JointTimeDistribution shifted(double offset) const;
};

/// SL needs two marginal profiles; TL needs a marginal A and a conditional B.
JointTimeDistribution joint_time_distribution(const TimingProfile& a, const TimingProfile& b, EventKind kind);
/// Arbitrary joint amplitude table (non-separable SL timing).
JointTimeDistribution joint_time_distribution(const TimeGrid& grid, const Eigen::MatrixXcd& joint_amplitude,
                                              EventKind kind);

} // namespace eventstate
