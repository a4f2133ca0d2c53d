#pragma once

#include "rectiwarp/geometry.hpp"

namespace rectiwarp::detail {

// Range test for normalized source coordinates, shared by every sampling
// path. Coordinates within 1e-9 px of the frame edge are snapped onto it
// instead of dropped — the same tolerance the sampler applies to the pixel
// lattice — so warps that are identities up to rounding keep the whole
// frame valid. Degenerate single-pixel axes keep the strict [-1,1] test.
// Returns false (invalid) for anything farther outside, and for NaN.
inline bool snap_into_square(Point2 &c, int w, int h) {
    const double ex = w > 1 ? 2e-9 / (w - 1) : 0.0;
    const double ey = h > 1 ? 2e-9 / (h - 1) : 0.0;
    if (c.x > 1.0 && c.x <= 1.0 + ex) c.x = 1.0;
    else if (c.x < -1.0 && c.x >= -1.0 - ex) c.x = -1.0;
    if (c.y > 1.0 && c.y <= 1.0 + ey) c.y = 1.0;
    else if (c.y < -1.0 && c.y >= -1.0 - ey) c.y = -1.0;
    return c.x >= -1.0 && c.x <= 1.0 && c.y >= -1.0 && c.y <= 1.0;
}

} // namespace rectiwarp::detail
