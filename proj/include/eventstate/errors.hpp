#pragma once

#include <stdexcept>
#include <string>

namespace eventstate {

/// Malformed or inconsistent input: bad dimensions, non-unitary evolutions,
/// states that fail validation, missing scenario pieces.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// A numerical invariant was violated by a computed result.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace eventstate
