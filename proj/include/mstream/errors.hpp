#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mstream {

// Root of every error thrown by the library. Subclasses carry the category
// the CLI maps onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Frame width, latent shape or style length does not match what was expected.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Index or range outside a sequence.
class BoundsError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

// Invalid pipeline / session / service configuration. The message names the
// violated constraint.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed input data (files, wire payloads). `line` is 1-based, 0 if unknown.
class DataError : public Error {
public:
    explicit DataError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class BackendError : public Error {
public:
    using Error::Error;
};

// A metric is undefined for the given input (e.g. every sequence too short).
class MetricError : public Error {
public:
    using Error::Error;
};

}  // namespace mstream
