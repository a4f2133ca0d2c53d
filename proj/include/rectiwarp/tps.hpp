#pragma once

#include <array>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rectiwarp/geometry.hpp"
#include "rectiwarp/image.hpp"

namespace rectiwarp {

// Thin-plate spline radial kernel U(r) = r^2 log r, with U(0) = 0.
double tps_kernel(double r);

// Regular lattice of control points over the normalized square [-1,1]^2,
// row-major with x varying fastest. The basic grid c0 is evenly spaced and
// covers the square exactly at the corners.
struct ControlGrid {
    int cols = 0;
    int rows = 0;
    std::vector<Point2> points;

    ControlGrid() = default;
    ControlGrid(int c, int r, std::vector<Point2> pts);

    // Evenly spaced cols x rows lattice covering [-1,1]^2. Defaults are
    // 12 along the width and 10 along the height.
    static ControlGrid basic(int cols = 12, int rows = 10);

    Point2 &at(int col, int row) {
        return points[static_cast<std::size_t>(row) * cols + col];
    }
    const Point2 &at(int col, int row) const {
        return points[static_cast<std::size_t>(row) * cols + col];
    }
    int count() const { return cols * rows; }
    bool same_shape(const ControlGrid &o) const {
        return cols == o.cols && rows == o.rows;
    }

    // grid + per-point offsets; lengths must match.
    ControlGrid displaced(const std::vector<Point2> &offsets) const;
};

void to_json(nlohmann::json &j, const ControlGrid &g);
void from_json(const nlohmann::json &j, ControlGrid &g);

// Closed-form TPS solution: affine part plus radial-kernel expansion over
// the source control points.
struct TpsTransform {
    std::array<double, 6> affine{}; // row-major 2x3: [a00 a01 a02; a10 a11 a12]
    std::vector<Point2> kernel_weights; // w_j, one per source point
    ControlGrid sources;
};

// Per-output-pixel source coordinates in normalized [-1,1]^2. Out-of-range
// values are permitted and are flagged at sampling time.
struct SamplingGrid {
    int width = 0;
    int height = 0;
    std::vector<Point2> coords; // row-major

    SamplingGrid() = default;
    SamplingGrid(int w, int h);

    Point2 &at(int x, int y) {
        return coords[static_cast<std::size_t>(y) * width + x];
    }
    const Point2 &at(int x, int y) const {
        return coords[static_cast<std::size_t>(y) * width + x];
    }
};

// Solves the (N_c+3)x(N_c+3) system with kernel matrix K_ij = U(|p_i-p_j|),
// regularized as K + lambda*I. With lambda = 0 the result interpolates the
// targets exactly. Throws DegenerateError when the assembled system's
// condition estimate exceeds 1e12 (e.g. collinear sources).
TpsTransform solve_tps(const ControlGrid &sources, const ControlGrid &targets,
                       double lambda = 0.0);

// A_phi * [p;1] + sum_j w_j U(|p - p_j|).
Point2 tps_evaluate(const TpsTransform &t, const Point2 &p);

// coords[v][u] = tps_evaluate(t, normalized(u,v)) for every output pixel.
SamplingGrid generate_grid(const TpsTransform &t, int width, int height);

// Row-major samples.size() x controls.size() matrix folding the solve and
// the evaluation: warped(sample_i) = sum_j influence[i][j] * target_j,
// separately per coordinate. Lets a caller re-evaluate a fixed
// source/sample geometry against many candidate targets in O(N_c) per
// sample.
std::vector<double> tps_influence_matrix(const ControlGrid &sources,
                                         const std::vector<Point2> &samples,
                                         double lambda = 0.0);

struct SampleResult {
    Image image;
    Mask mask; // 1 where the source coordinate was in range
};

// Backward warp: each output pixel is the bilinear interpolation of the
// four input neighbors of its source coordinate. Coordinates outside
// [-1,1]^2 produce value 0 and mask 0, with a 1e-9 px snap tolerance at
// the frame edge (and on the pixel lattice) so that warps that are
// identities up to rounding copy the input bit for bit.
SampleResult bilinear_sample(const Image &image, const SamplingGrid &grid);

// Warp of a binary mask through the same grid: bilinear on the mask values,
// thresholded at 0.5, and intersected with the sampler's validity mask.
Mask warp_mask(const Mask &mask, const SamplingGrid &grid);

// Two-stage residual-progressive application. Both sampling passes read
// only x0 and m0, never the intermediate x1; consequently x_D is bit-equal
// to a one-shot warp with targets c2 = (c0 + delta1) + delta2.
struct RpTpsResult {
    Image x1;
    Mask m1;
    Image xd;
    Mask md;
    ControlGrid c1;
    ControlGrid c2;
};

RpTpsResult rp_tps_apply(const Image &x0, const Mask &m0, const ControlGrid &c0,
                         const std::vector<Point2> &delta1,
                         const std::vector<Point2> &delta2, double lambda = 0.0);

} // namespace rectiwarp
