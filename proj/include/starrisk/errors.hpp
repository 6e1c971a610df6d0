#pragma once

#include <stdexcept>
#include <string>

namespace starrisk {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Profiles or vectors living on incompatible state spaces.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A parameter outside the mathematical domain of an operation (level, lambda, weight).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Structurally invalid arguments: empty families, rank out of range, unknown names.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A bracketing search whose ends do not decide membership.
class SearchError : public Error {
public:
    using Error::Error;
};

/// A probability mass that cannot be realized exactly on a finite space.
class PrecisionError : public Error {
public:
    using Error::Error;
};

/// Inf-convolution requested without an established normality condition.
class RefusedError : public Error {
public:
    using Error::Error;
};

/// Malformed CSV or JSON input, with a location in the message.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input that parses but violates a data invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

}  // namespace starrisk
