#pragma once

#include <stdexcept>
#include <string>

namespace faramtn {

// Error taxonomy shared by the whole library. The C API maps each class to a
// status code; in-process callers catch by type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct LookupError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace faramtn
