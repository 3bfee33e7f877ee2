#pragma once

#include <stdexcept>
#include <string>

namespace mechdet {

// Every error thrown by the library carries a stable machine-readable code
// (e.g. "BAD_MAGIC", "SCHEMA_MISMATCH") next to the human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Malformed or unreadable container bytes.
class FormatError : public Error {
public:
    using Error::Error;
};

// Well-formed data that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Caller supplied inconsistent arguments (shape mismatch, bad config).
class InputError : public Error {
public:
    using Error::Error;
};

}  // namespace mechdet
