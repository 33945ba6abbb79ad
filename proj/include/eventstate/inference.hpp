#pragma once

// Information carried by detector A about detector B's record: minimum-error
// discrimination of the conditional states, classical correlation C_A, and
// the search for an A basis that predicts B deterministically.

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "eventstate/event_states.hpp"
#include "eventstate/quantum_core.hpp"

namespace eventstate {

/// Complete set of orthogonal projectors on D_A.
class ProjectiveMeasurement {
public:
    explicit ProjectiveMeasurement(std::vector<Operator> projectors,
                                   const NumericPolicy& policy = default_policy());
    static ProjectiveMeasurement from_basis(const MeasurementModel& basis);
    /// {|n+><n+|, |n-><n-|} along the Bloch direction.
    static ProjectiveMeasurement bloch(double theta, double phi);

    const std::vector<Operator>& projectors() const noexcept { return projectors_; }
    Index dim() const { return projectors_.front().rows(); }

private:
    std::vector<Operator> projectors_;
};

struct HelstromResult {
    double p_suc = 0.0;
    /// Projector onto the positive eigenspace of p1 s1 - p2 s2: click means "hypothesis 1".
    Operator optimal_projector;
};

/// p_suc = (1 + ||p1 s1 - p2 s2||_1) / 2.
HelstromResult helstrom_success(double p1, const DensityMatrix& s1, double p2, const DensityMatrix& s2);
/// (1 + sqrt(1 - 4 p1 p2 |<l1|l2>|^2)) / 2 for pure hypotheses.
double helstrom_pure(double p1, const Ket& lambda1, double p2, const Ket& lambda2);

struct PairwiseBound {
    std::size_t first = 0;
    std::size_t second = 0;
    double p_suc = 0.0; // with priors renormalized to the pair
};

struct Prediction {
    /// Absent when B has more than two outcomes (partial result).
    std::optional<double> p_suc;
    std::optional<ProjectiveMeasurement> measurement;
    std::optional<BlochAngles> bloch; // qubit D_A with a rank-1 optimal projector
    bool partial = false;
    bool used_pure_formula = false;
    std::vector<PairwiseBound> pairwise;
};

/// Alice guesses Bob's outcome by discriminating her conditional states.
Prediction predict_future_outcome(const ConditionalDecomposition& decomp);

struct SearchPolicy {
    std::size_t theta_steps = 64;
    std::size_t phi_steps = 128;
    std::size_t max_iterations = 200;
    double tolerance = 1e-6;
    /// 0: read EVENTSTATE_NUM_THREADS, falling back to hardware concurrency.
    std::size_t threads = 0;
    /// Candidate measurements for d_A > 2 (evaluated instead of the Bloch search).
    std::vector<ProjectiveMeasurement> candidates;
};

struct ClassicalCorrelation {
    double c_a = 0.0; // bits
    ProjectiveMeasurement measurement = ProjectiveMeasurement::bloch(0.0, 0.0);
    std::optional<BlochAngles> bloch;
};

/// S(rho_B) - sum_i p_i S(rho_{B,i}) for one measurement on D_A.
double entropy_reduction(const EventState& state, const ProjectiveMeasurement& measurement);

/// Maximum of entropy_reduction over rank-1 projective measurements on D_A.
ClassicalCorrelation classical_correlation(const EventState& state, const SearchPolicy& search = {});

struct DeterminismCheck {
    Eigen::MatrixXd gram; // |<lambda_i|lambda_j>| over non-omitted outcomes
    double max_off_diagonal = 0.0;
    bool deterministic = false;
};

constexpr double kDeterminismTolerance = 1e-8;

DeterminismCheck determinism_check(const ConditionalDecomposition& decomp);

struct BasisNotFound {
    double best_residual = 0.0;
    MeasurementModel best_basis = MeasurementModel::named("Sz");
};

struct DeterministicBasis {
    MeasurementModel basis;
    BlochAngles bloch;
    double residual = 0.0;
};

using BasisSearchResult = std::variant<DeterministicBasis, BasisNotFound>;

/// Qubit A-basis search (coarse Bloch grid, then local refinement) for which
/// the lambda states are orthogonal.
BasisSearchResult find_deterministic_basis(const Ket& initial, const Operator& evolution,
                                           const MeasurementModel& basis_b, const SearchPolicy& search = {});

/// Threads used by grid searches for a given policy.
std::size_t search_threads(const SearchPolicy& search);

} // namespace eventstate
