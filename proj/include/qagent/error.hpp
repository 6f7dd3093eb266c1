#pragma once

#include <stdexcept>
#include <string>

namespace qagent {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Input text did not follow the expected record format.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what), line_(line) {}
    explicit ParseError(const std::string& what) : Error(what) {}

    /// 1-based line number, 0 when not tied to a line.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

/// Data parsed fine but violates a uniqueness or consistency rule.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Caller passed an argument outside an operation's domain.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Saved index is unreadable: wrong version, truncated or corrupted.
class IndexFormatError : public Error {
public:
    using Error::Error;
};

}  // namespace qagent
