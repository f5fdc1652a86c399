#pragma once

#include <stdexcept>
#include <string>

namespace clustvit {

// Exception hierarchy. The CLI maps these onto process exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Malformed or missing input files, invalid masks.
struct DataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

}  // namespace clustvit
