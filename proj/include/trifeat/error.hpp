#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trifeat {

// Base of every error the library throws. The CLI maps these to exit codes
// and the session service maps them to HTTP statuses.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

// Incompatible combination of otherwise valid settings, e.g. a generalist
// oracle attached to ground truth without a tree.
class ConfigError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Raised by transcript replay when an event contradicts the attached truth.
class ReplayError : public ValidationError {
public:
    ReplayError(std::size_t event_index, const std::string& what)
        : ValidationError("event " + std::to_string(event_index) + ": " + what),
          event_index_(event_index) {}

    std::size_t event_index() const noexcept { return event_index_; }

private:
    std::size_t event_index_;
};

} // namespace trifeat
