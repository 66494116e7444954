#pragma once

#include <stdexcept>
#include <string>

namespace heatrisk {

/// Invalid parameters or inconsistent dimensions passed to a library call.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (bracketing, singular solve, overflow, divergence).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed experiment configuration or artifact file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace heatrisk
