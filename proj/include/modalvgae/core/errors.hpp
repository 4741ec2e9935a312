#pragma once

#include <stdexcept>
#include <string>

namespace mvgae {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Random structure generation could not produce a valid configuration.
class GenerationError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, singular systems, unstable integration.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// On-disk data is malformed, truncated, or from an incompatible version.
class FormatError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

}  // namespace mvgae
