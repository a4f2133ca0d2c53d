#pragma once

#include <vector>

#include "rectiwarp/geometry.hpp"
#include "rectiwarp/image.hpp"

namespace rectiwarp {

// Signed distance field of a binary mask on the align-corners square
// [-1,1]^2: negative strictly inside the foreground, positive outside,
// zero on the discrete boundary (foreground pixels with a 4-neighbor in
// the background). Distances are exact Euclidean distances to the boundary
// pixel set, computed with the two-pass lower-envelope transform and
// anisotropic pixel spacing (2/(w-1), 2/(h-1)).
class LevelSet {
public:
    LevelSet(const Mask &mask);

    int width() const { return width_; }
    int height() const { return height_; }

    // Raw grid value at a pixel.
    double at(int x, int y) const {
        return sdf_[static_cast<std::size_t>(y) * width_ + x];
    }

    // Bilinear interpolation at a normalized point; coordinates are clamped
    // to the square.
    double signed_distance(const Point2 &p) const;

    // Asymmetric boundary-keeping penalty of a single point:
    // |d| inside, 0 on the boundary, 2|d| outside.
    double penalty(const Point2 &p) const;

    // Mean penalty over a set of points.
    double penalty(const std::vector<Point2> &points) const;

    const std::vector<double> &grid() const { return sdf_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> sdf_;
};

} // namespace rectiwarp
