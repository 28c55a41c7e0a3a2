#pragma once

#include <stdexcept>

namespace nfde {

// Input/file problems: malformed CSV, missing columns, insufficient data.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failures: non-finite states, diverged series, bad adjoints.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace nfde
