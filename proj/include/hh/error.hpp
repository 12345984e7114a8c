#pragma once

#include <stdexcept>
#include <string>

namespace hh {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent or unsupported configuration (sample-rate mismatch, bad dimensions).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data violates a documented invariant.
class ValidationError : public Error {
public:
    ValidationError(const std::string& message, std::string field = {})
        : Error(message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// API misuse, e.g. a second backward pass over a consumed recording.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Filesystem failures; the message always carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

/// File written by an incompatible format version or for a different configuration.
class IncompatibleError : public Error {
public:
    using Error::Error;
};

/// An evaluation that cannot produce meaningful numbers, e.g. an oracle classifier below its gate.
class EvaluationError : public Error {
public:
    using Error::Error;
};

}  // namespace hh
