#include "eventstate/witnesses.hpp"

#include <cmath>
#include <limits>

#include "eventstate/errors.hpp"

namespace eventstate {

namespace {

constexpr double kNormalizationTolerance = 1e-6;

void require_normalized(const JointTimeDistribution& dist, std::string_view what) {
    if (dist.p.rows() != static_cast<Index>(dist.grid.n_bins) || dist.p.cols() != dist.p.rows()) {
        throw DimensionMismatch(std::string(what) + ": table does not match its grid");
    }
    if ((dist.p.array() < 0.0).any()) throw InvalidInput(std::string(what) + ": negative probability");
    if (std::abs(dist.total() - 1.0) > kNormalizationTolerance) {
        throw InvalidInput(std::string(what) + ": table sums to " + std::to_string(dist.total()));
    }
}

} // namespace

std::string to_string(Verdict v) {
    return v == Verdict::CausalSignature ? "CausalSignature" : "NoSignature";
}

CoherenceWitness coherence_witness(const EventState& state) {
    const EventState detectors = trace_timers(state);
    CoherenceWitness out;
    out.c_rel = relative_entropy_of_coherence(detectors.rho, detectors.joint_record_basis());
    out.verdict = out.c_rel > kWitnessThreshold ? Verdict::CausalSignature : Verdict::NoSignature;
    return out;
}

double conditional_mean_arrival(const JointTimeDistribution& dist, std::size_t k) {
    if (k >= dist.grid.n_bins) throw InvalidInput("conditional mean: t_A bin out of range");
    const auto row = dist.p.row(static_cast<Index>(k));
    const double mass = row.sum();
    if (!(mass > 0.0)) throw InvalidInput("conditional mean: row " + std::to_string(k) + " has zero mass");
    return row.dot(dist.times().transpose()) / mass;
}

double time_correlation(const JointTimeDistribution& dist) {
    require_normalized(dist, "time correlation");
    // Centering on t0 keeps the covariance exactly shift-invariant.
    Eigen::VectorXd t(static_cast<Index>(dist.grid.n_bins));
    for (std::size_t k = 0; k < dist.grid.n_bins; ++k) t(static_cast<Index>(k)) = static_cast<double>(k) * dist.grid.dt;
    const double total = dist.total();
    const double mean_a = dist.marginal_a().dot(t) / total;
    const double mean_b = dist.marginal_b().dot(t) / total;
    const double cross = t.dot(dist.p * t) / total;
    return cross - mean_a * mean_b;
}

ChebyshevCheck chebyshev_check(const JointTimeDistribution& dist) {
    ChebyshevCheck out;
    out.correlation = time_correlation(dist);
    out.nonneg = out.correlation >= -kWitnessThreshold;
    out.monotone_conditional_mean = true;
    double previous = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < dist.grid.n_bins; ++k) {
        if (!(dist.p.row(static_cast<Index>(k)).sum() > 0.0)) continue;
        const double mean = conditional_mean_arrival(dist, k);
        if (mean < previous - 1e-12 * std::max(1.0, std::abs(previous))) out.monotone_conditional_mean = false;
        previous = mean;
    }
    return out;
}

} // namespace eventstate
