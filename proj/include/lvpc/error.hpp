#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lvpc {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input text. `line` is 1-based; 0 when not applicable.
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t line_no)
        : Error(line_no ? what + " (line " + std::to_string(line_no) + ")" : what), line(line_no) {}
    std::size_t line;
};

/// Data violates a structural invariant (duplicate vintage rows, mixed versioning).
struct IntegrityError : Error {
    using Error::Error;
};

/// Mathematical domain violation, e.g. log of a non-positive value.
struct DomainError : Error {
    using Error::Error;
};

struct InsufficientDataError : Error {
    using Error::Error;
};

struct SingularMatrixError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

/// Compared forecasts do not cover the same origins.
struct AlignmentError : Error {
    using Error::Error;
};

/// Objective not finite at the optimizer's starting point.
struct SeedError : Error {
    using Error::Error;
};

struct PreconditionError : Error {
    using Error::Error;
};

}  // namespace lvpc
