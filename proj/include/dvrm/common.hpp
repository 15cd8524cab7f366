#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dvrm {

/// Base class for all library errors.
struct DvrmError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor dimension / shape mismatches. Names the offending axis where possible.
struct ShapeError : DvrmError {
    using DvrmError::DvrmError;
};

/// Invalid configuration or argument values (bad band edges, bad ratios, ...).
struct ParamError : DvrmError {
    using DvrmError::DvrmError;
};

/// Malformed or unreadable data: containers, images, checkpoints.
struct DataError : DvrmError {
    using DvrmError::DvrmError;
};

/// Non-finite values where finite ones are required (NaN loss, inf activation).
struct NumericError : DvrmError {
    using DvrmError::DvrmError;
};

inline constexpr double kPi = 3.14159265358979323846;

template <typename T>
inline bool all_finite(const T* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(p[i]))) return false;
    return true;
}

} // namespace dvrm
