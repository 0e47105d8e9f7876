#pragma once

#include <stdexcept>
#include <string>

namespace convpinn {

/// Invalid caller input: shape mismatches, unsupported orders, missing data.
struct InvalidInput : std::invalid_argument {
    explicit InvalidInput(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Bad run configuration (unknown problem name, malformed resolution, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure at runtime: NaN in a forward pass, divergence,
/// a linear solve that did not reach its residual tolerance.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace convpinn
