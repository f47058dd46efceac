#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace aipersona {

/// Root of every error the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was not met by the caller.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Bad run configuration, missing resources, or non-retryable provider setup.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// A model provider could not be reached (after retries, where applicable).
class TransportError : public Error {
public:
    using Error::Error;
};

/// Lookup of an id (session, user, template) that does not exist.
class NotFoundError : public Error {
public:
    using Error::Error;
};

/// The operation conflicts with current state (e.g. appending to a closed session).
class ConflictError : public Error {
public:
    using Error::Error;
};

/// Model output did not follow the grammar a parser expects.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::string raw)
        : Error(message), raw_(std::move(raw)) {}

    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

}  // namespace aipersona
