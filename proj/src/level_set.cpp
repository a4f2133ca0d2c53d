#include "rectiwarp/level_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rectiwarp/errors.hpp"

namespace rectiwarp {

namespace {

constexpr double kFar = 1e20;

// 1-D squared-distance transform (lower envelope of parabolas) with sample
// positions q*spacing; f holds squared heights, kFar marks "no site". The
// envelope bounds must be true infinities: intersections involving kFar
// heights are finite but can exceed kFar in magnitude, and a finite
// sentinel would let the hull index underflow.
void dt_1d(const std::vector<double> &f, std::vector<double> &d, int n,
           double spacing, std::vector<int> &v, std::vector<double> &z) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        const double xq = q * spacing;
        double s;
        for (;;) {
            const double xv = v[k] * spacing;
            s = ((f[q] + xq * xq) - (f[v[k]] + xv * xv)) / (2.0 * (xq - xv));
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        const double xq = q * spacing;
        while (z[k + 1] < xq) ++k;
        const double dx = xq - v[k] * spacing;
        d[q] = dx * dx + f[v[k]];
    }
}

} // namespace

LevelSet::LevelSet(const Mask &mask) : width_(mask.width), height_(mask.height) {
    if (width_ < 2 || height_ < 2) {
        throw std::invalid_argument("LevelSet: mask must be at least 2x2");
    }
    if (mask.all_ones() || mask.all_zeros()) {
        throw DegenerateError("LevelSet: mask has no boundary (all ones or all zeros)");
    }

    // Boundary sites: foreground pixels with a 4-neighbor in the
    // background. The image frame is not treated as an implicit border.
    const std::size_t total = static_cast<std::size_t>(width_) * height_;
    std::vector<double> sq(total, kFar);
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (!mask.at(x, y)) continue;
            const bool boundary = (x > 0 && !mask.at(x - 1, y)) ||
                                  (x + 1 < width_ && !mask.at(x + 1, y)) ||
                                  (y > 0 && !mask.at(x, y - 1)) ||
                                  (y + 1 < height_ && !mask.at(x, y + 1));
            if (boundary) sq[static_cast<std::size_t>(y) * width_ + x] = 0.0;
        }
    }

    const double dx = 2.0 / (width_ - 1);
    const double dy = 2.0 / (height_ - 1);
    const int scratch_len = std::max(width_, height_);
    std::vector<double> f(scratch_len), d(scratch_len);
    std::vector<int> v(scratch_len);
    std::vector<double> z(scratch_len + 1);

    // Pass 1: along rows with spacing dx.
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) f[x] = sq[static_cast<std::size_t>(y) * width_ + x];
        dt_1d(f, d, width_, dx, v, z);
        for (int x = 0; x < width_; ++x) sq[static_cast<std::size_t>(y) * width_ + x] = d[x];
    }
    // Pass 2: along columns with spacing dy.
    for (int x = 0; x < width_; ++x) {
        for (int y = 0; y < height_; ++y) f[y] = sq[static_cast<std::size_t>(y) * width_ + x];
        dt_1d(f, d, height_, dy, v, z);
        for (int y = 0; y < height_; ++y) sq[static_cast<std::size_t>(y) * width_ + x] = d[y];
    }

    sdf_.resize(total);
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width_ + x;
            const double dist = std::sqrt(sq[i]);
            if (dist == 0.0) {
                sdf_[i] = 0.0;
            } else {
                sdf_[i] = mask.at(x, y) ? -dist : dist;
            }
        }
    }
}

double LevelSet::signed_distance(const Point2 &p) const {
    const double cx = std::clamp(p.x, -1.0, 1.0);
    const double cy = std::clamp(p.y, -1.0, 1.0);
    const double px = norm_to_pixel(cx, width_);
    const double py = norm_to_pixel(cy, height_);
    int x0 = static_cast<int>(std::floor(px));
    int y0 = static_cast<int>(std::floor(py));
    x0 = std::clamp(x0, 0, width_ - 2);
    y0 = std::clamp(y0, 0, height_ - 2);
    const double fx = px - x0;
    const double fy = py - y0;
    const double v00 = at(x0, y0);
    const double v10 = at(x0 + 1, y0);
    const double v01 = at(x0, y0 + 1);
    const double v11 = at(x0 + 1, y0 + 1);
    return (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 +
           (1.0 - fx) * fy * v01 + fx * fy * v11;
}

double LevelSet::penalty(const Point2 &p) const {
    const double d = signed_distance(p);
    // |d| inside, 0 on the boundary, 2|d| outside.
    return d < 0.0 ? -d : 2.0 * d;
}

double LevelSet::penalty(const std::vector<Point2> &points) const {
    if (points.empty()) {
        throw std::invalid_argument("LevelSet::penalty: empty point list");
    }
    double sum = 0.0;
    for (const Point2 &p : points) sum += penalty(p);
    return sum / static_cast<double>(points.size());
}

} // namespace rectiwarp
