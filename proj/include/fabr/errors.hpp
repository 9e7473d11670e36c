#pragma once

#include <stdexcept>
#include <string>

namespace fabr {

/// Base of every error the engine raises. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file or header.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Well-formed input carrying invalid values (NaN/Inf, bad labels).
class DataError : public Error {
public:
    using Error::Error;
};

/// Precondition violated: out-of-range index, mismatched shapes or plans.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Eigensolver failure or a spectrum that is not PSD within tolerance.
class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Raised before allocating an N x N Gram matrix that exceeds the memory budget.
class MemoryBudgetError : public DomainError {
public:
    using DomainError::DomainError;
};

} // namespace fabr
