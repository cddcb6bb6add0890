#pragma once

#include <stdexcept>
#include <string>

namespace diffplan {

// Shape or dimension mismatch between arrays, kernels, or constraints.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Argument outside its valid range (diffusion step index, horizon, ...).
struct ValueError : std::runtime_error {
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent run configuration. Mapped to exit code 2 by the CLI.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File format or filesystem failure.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace diffplan
