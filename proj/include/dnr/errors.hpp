#pragma once

#include <stdexcept>
#include <string>

namespace dnr {

/// Invalid user-facing configuration (CLI exit code 2).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Shapes or geometries that do not agree (CLI exit code 5).
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Input values outside an operation's domain (negative counts, bad axes...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// File system or file format problems (CLI exit code 3).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss (CLI exit code 4).
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dnr
