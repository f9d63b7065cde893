#pragma once

#include <stdexcept>
#include <string>

namespace mana {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A value went NaN or infinite.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Misuse of the differentiation tape (non-scalar loss, replayed backward, ...).
class TapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value or unparsable configuration text.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace mana
