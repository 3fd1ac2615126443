#pragma once

#include <stdexcept>
#include <string>

namespace mandm {

/// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input or configuration that violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Why an event was refused by the live state.
enum class Rejection {
    UnknownNode,
    OutOfRange,
    GpuCountMismatch,
    JobAlreadyActive,
    UnknownJob,
    UnknownUser,
    EmptyNodeSet,
    InvalidId,
};

const char* to_string(Rejection r) noexcept;

class RejectedEvent : public Error {
public:
    RejectedEvent(Rejection reason, const std::string& detail)
        : Error(std::string(to_string(reason)) + ": " + detail), reason_(reason) {}

    Rejection reason() const noexcept { return reason_; }

private:
    Rejection reason_;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed segment file; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class BusyError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

}  // namespace mandm
