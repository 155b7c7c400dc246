#pragma once

#include <stdexcept>

namespace qsd {

// Rejected input (bad arguments, malformed files). The CLI maps it to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Non-convergence, rejected time step, underflow, all particles absorbed.
// The CLI maps it to exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qsd
