#pragma once

#include <stdexcept>
#include <string>

namespace stemalign {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A parameter or input violates a documented precondition.
struct ArgumentError : Error {
    using Error::Error;
};

/// A file could not be parsed under its declared format.
struct ParseError : Error {
    using Error::Error;
};

/// Filesystem-level failure (missing file, unwritable path).
struct IoError : Error {
    using Error::Error;
};

/// The data is valid but too sparse or degenerate for the requested
/// computation (empty stem map, < 3 correspondences, collinear geometry, ...).
struct DataError : Error {
    using Error::Error;
};

/// Wraps an error from a pipeline stage with the stage name so CLI users
/// can tell which step failed.
struct StageError : Error {
    StageError(const std::string& stage, const std::string& what)
        : Error("[" + stage + "] " + what), stage_name(stage) {}
    std::string stage_name;
};

}  // namespace stemalign
