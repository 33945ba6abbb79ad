#pragma once

// CHSH on event states: correlators are read off the detector records, so
// the same code serves spacelike and timelike pairs.

#include <array>

#include "eventstate/event_states.hpp"

namespace eventstate {

constexpr double kTsirelsonBound = 2.8284271247461903; // 2 sqrt(2)

/// sum alpha_A alpha_B <alpha_A alpha_B|rho|alpha_A alpha_B> with the labels of
/// obs_a / obs_b. The observables must use the state's record kets.
double event_correlator(const EventState& state, const MeasurementModel& obs_a, const MeasurementModel& obs_b);

/// Measurement settings of one CHSH run.
struct ChshSettings {
    MeasurementModel a;
    MeasurementModel a_prime;
    MeasurementModel b;
    MeasurementModel b_prime;
};

/// Qubit basis along angle `angle` (radians) in the x-z plane of the Bloch sphere.
MeasurementModel plane_setting(double angle);

/// Scenarios ordered (a,b), (a,b'), (a',b), (a',b'), copied from `base`.
std::array<EventScenario, 4> chsh_family(const EventScenario& base, const ChshSettings& settings);

struct ChshReport {
    std::array<double, 4> correlators{};
    double s = 0.0;
    bool tsirelson_ok = false;
};

/// S = |E(a,b) + E(a,b') + E(a',b) - E(a',b')|, each rho built independently.
/// `timed` is forwarded to build_event_state.
ChshReport chsh_value(const std::array<EventScenario, 4>& family, bool timed = false);

} // namespace eventstate
