#pragma once

#include <stdexcept>
#include <string>

namespace hbf {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// A Hermitian system could not be factorized even after ridge escalation.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

// The zero-forcing constraint matrix is rank deficient (too few antennas,
// degenerate channel, ...).
class RankError : public Error {
public:
    using Error::Error;
};

// Power budget is below the minimum power needed to meet the constraint.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

// An iterative solver hit its iteration cap before meeting its tolerances.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Invalid scenario or experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace hbf
