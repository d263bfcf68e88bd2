#pragma once

#include <stdexcept>
#include <string>

namespace oasis {

// Base of all library errors. CLI maps ParameterError/ParseError/InputError
// to exit code 1 and everything else to exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParameterError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct InputError : Error {
    using Error::Error;
};
struct DesignError : Error {
    using Error::Error;
};
struct DegenerateScoreError : Error {
    using Error::Error;
};
struct DivisionByZeroError : Error {
    using Error::Error;
};
struct DegenerateDensityError : Error {
    using Error::Error;
};
struct InsufficientOverlapError : Error {
    using Error::Error;
};
struct EstimationError : Error {
    using Error::Error;
};
struct NoDataError : Error {
    using Error::Error;
};

}  // namespace oasis
