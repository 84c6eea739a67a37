#pragma once

#include <stdexcept>
#include <string>

namespace geophoto {

// Error families map one-to-one onto CLI exit codes (2, 3, 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Not enough points for a fit; callers usually record a skip instead of failing.
class InsufficientDataError : public DataError {
public:
    using DataError::DataError;
};

// Input that admits no meaningful fit, e.g. zero variance.
class DegenerateDataError : public DataError {
public:
    using DataError::DataError;
};

class ConvergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

} // namespace geophoto
