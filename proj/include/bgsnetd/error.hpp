#pragma once

#include <stdexcept>
#include <string>

namespace bgsnetd {

/// Base of every error thrown by the library. `what()` is always a single line.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

enum class ParseErrorKind { MalformedHeader, Truncated, UnsupportedMaxval, UnknownCode, BadMagic, BadVersion };

class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    ParseErrorKind kind() const noexcept { return kind_; }

private:
    ParseErrorKind kind_;
};

/// Inputs that are individually well formed but inconsistent with each other
/// (dimension mismatches, empty sequences, missing classes, ...).
class DataError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace bgsnetd
