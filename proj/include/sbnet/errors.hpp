#pragma once

#include <stdexcept>
#include <string>

namespace sbnet {

/// Base of every error this library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or argument mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Bad argument value (negative std, non-binary treatment, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// NaN/Inf encountered, non-PD matrix, diverging training.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed or unreadable input data.
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace sbnet
