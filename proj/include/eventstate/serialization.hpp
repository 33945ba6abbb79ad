#pragma once

// JSON forms of operators, bases, profiles and event states. Complex matrices
// are stored as separate row-major "re" and "im" tables.

#include <string>

#include <json.hpp>

#include "eventstate/event_states.hpp"
#include "eventstate/quantum_core.hpp"
#include "eventstate/timing.hpp"

namespace eventstate {

using Json = nlohmann::ordered_json;

/// x printed with `digits` significant digits and read back; -0 becomes 0.
double round_significant(double x, int digits = 12);
/// Copy of `j` with every floating-point number passed through round_significant.
Json rounded(const Json& j, int digits = 12);

Json to_json(const Operator& op);
Json to_json(const Ket& psi);
Json to_json(const MeasurementModel& basis);
Json to_json(const TimingProfile& profile);
Json to_json(const EventState& state);
Json to_json(const BlochAngles& angles);

/// Inverses of to_json. Throw InvalidInput on malformed documents.
Operator operator_from_json(const Json& j);
MeasurementModel basis_from_json(const Json& j);
EventState state_from_json(const Json& j);

constexpr const char* kStateFormat = "eventstate-state/1";

} // namespace eventstate
