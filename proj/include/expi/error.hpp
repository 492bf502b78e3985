#pragma once

#include <stdexcept>
#include <string>

namespace expi {

// I/O failures: missing files, undecodable images, bad manifests.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric failures: non-finite losses, diverged fits.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Contract violations: dimension mismatches, out-of-range arguments.
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

} // namespace expi
