#pragma once
#include <stdexcept>
#include <string>

namespace pf {

// Error taxonomy shared across the library. CLI maps these to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/axis mismatches between tensors.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid argument values (counts, modes, labels out of range).
struct ArgumentError : Error {
    using Error::Error;
};

// Non-finite values where finiteness is required.
struct NumericError : Error {
    using Error::Error;
};

// Malformed file contents.
struct ParseError : Error {
    using Error::Error;
};

// Inconsistent or unknown configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
    using Error::Error;
};

} // namespace pf
