#pragma once

#include <stdexcept>
#include <string>

namespace scalebench {

/// Base class for all scalebench errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad model roles, out-of-range parameters,
/// unknown language groups, malformed config documents.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Transport-level failure talking to an inference endpoint, after retries.
class BackendError : public Error {
public:
    using Error::Error;
};

/// The endpoint rejected the request itself (e.g. token-limit exceeded).
class RequestError : public Error {
public:
    using Error::Error;
};

/// The endpoint replied, but the payload could not be interpreted.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// A judge reply contained neither or both of the verdict markers.
class VerdictParseError : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

/// Dataset schema violations, reported en masse at load time.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Not enough data to compute a statistic (e.g. < 2 complete problems).
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Mismatched dimensions or key sets between two inputs.
class DimensionError : public Error {
public:
    using Error::Error;
};

} // namespace scalebench
