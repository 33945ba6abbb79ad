#pragma once

// Causality indicators: record-basis coherence of detector states and the
// covariance of the two detection times.

#include <cstddef>
#include <string>

#include "eventstate/event_states.hpp"
#include "eventstate/timing.hpp"

namespace eventstate {

/// Zero coherence does not certify spacelike separation, hence no
/// "spacelike" verdict.
enum class Verdict { CausalSignature, NoSignature };

std::string to_string(Verdict v);

constexpr double kWitnessThreshold = 1e-9; // bits

struct CoherenceWitness {
    double c_rel = 0.0;
    Verdict verdict = Verdict::NoSignature;
};

/// Relative entropy of coherence in the joint record basis. Timed states are
/// traced over their timers first.
CoherenceWitness coherence_witness(const EventState& state);

/// E(T_B | t_A = t_k) = sum_l t_l p(l | k).
double conditional_mean_arrival(const JointTimeDistribution& dist, std::size_t k);

/// Covariance <T_A T_B> - <T_A><T_B>. Rejects tables whose total differs from 1 by more than 1e-6.
double time_correlation(const JointTimeDistribution& dist);

struct ChebyshevCheck {
    double correlation = 0.0;
    bool nonneg = false;
    /// Whether E(T_B|t_A) is nondecreasing over the rows carrying mass, the
    /// condition under which the Harris inequality guarantees nonneg.
    bool monotone_conditional_mean = false;
};

ChebyshevCheck chebyshev_check(const JointTimeDistribution& dist);

} // namespace eventstate
