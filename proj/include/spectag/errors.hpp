#pragma once

#include <stdexcept>
#include <string>

namespace spectag {

// Base class for all library errors. Subclasses map to distinct CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration: unknown keys, out-of-range parameters, malformed grids.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Bad or inconsistent input data: dimension mismatches, unreadable files,
// degenerate regions, missing classes.
class DataError : public Error {
public:
    using Error::Error;
};

// Degenerate calibration (|W - D| below epsilon). Images failing this are
// rejected individually during evaluation instead of aborting the run.
class CalibrationError : public DataError {
public:
    using DataError::DataError;
};

// Numerical failure: solver non-convergence, non-finite intermediate values.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace spectag
