#pragma once

#include <stdexcept>
#include <string>

namespace specdet {

/// Malformed or inconsistent input data (files, mismatched dimensions
/// between datasets and profiles, insufficient samples).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical procedure failed (solver non-convergence, divergent training,
/// undefined statistic).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace specdet
