#pragma once

#include <stdexcept>
#include <string>

namespace magix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (CSV, JSON document, schema sidecar).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Failure talking to an external model process.
class TransportError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failed; carries the stage name for reporting.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace magix
