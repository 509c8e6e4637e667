#pragma once

#include <stdexcept>
#include <string>

namespace rumid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (model JSON, CSV, grid, flags).
class InputError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the domain of a function (e.g. log utility at a <= 0).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: rank deficiency, step underflow, non-finite values.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A derivative denominator fell below the degeneracy threshold.
class DegenerateError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A characteristic could not reach the anchor line, or a v-node has no preimage.
class CoverageError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A requested level value lies outside the attained range of a monotone function.
class RangeError : public NumericalError {
public:
    RangeError(const std::string& what, double lo, double hi)
        : NumericalError(what), lo_(lo), hi_(hi) {}

    double attained_lo() const { return lo_; }
    double attained_hi() const { return hi_; }

private:
    double lo_;
    double hi_;
};

} // namespace rumid
