#pragma once

#include <stdexcept>
#include <string>

namespace sppa {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes (ConfigError -> 2, anything else -> 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Two values that should live in the same space do not.
class TagMismatchError : public Error {
public:
    using Error::Error;
};

// A point violates the invariants of its space (off-sheet, bad leg, ...).
class InvalidPointError : public Error {
public:
    using Error::Error;
};

// An argument is outside the domain of an operation (t > 1, lambda <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// User-supplied configuration is malformed or inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

// The requested problem is valid but has no implementation here.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

} // namespace sppa
