#pragma once

#include <stdexcept>

namespace rectiwarp {

// An iterative routine exhausted its iteration cap without reaching its
// tolerance, or the configuration makes the sought solution unreachable
// (e.g. a non-monotone radial map during inversion).
class NoConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A linear system or input configuration is numerically singular (e.g.
// collinear TPS sources, a mask without a boundary, a rank-deficient
// least-squares design).
class DegenerateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace rectiwarp
