#pragma once

#include <stdexcept>
#include <string>

namespace scar {

/// Invalid configuration or argument values (bad sizes, out-of-range knobs,
/// non-finite inputs). The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File access or parse failures. The CLI maps this to exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a usable result at all (distinct
/// from a solve that merely returns with its non-converged flag set).
/// The CLI maps this to exit code 4.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace scar
