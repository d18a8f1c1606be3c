#pragma once

#include <stdexcept>
#include <string>

namespace qsync {

/// Invalid experiment configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical invariant was violated during a run (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input is well-formed but carries no information for the requested
/// statistic, e.g. a constant series handed to a correlation or a fit.
class DegenerateInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace qsync
