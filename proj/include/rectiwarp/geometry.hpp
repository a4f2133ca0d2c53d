#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rectiwarp/image.hpp"

namespace rectiwarp {

// Point on the normalized image plane.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    Point2() = default;
    Point2(double px, double py) : x(px), y(py) {}

    Point2 operator+(const Point2 &o) const { return {x + o.x, y + o.y}; }
    Point2 operator-(const Point2 &o) const { return {x - o.x, y - o.y}; }
    Point2 operator*(double s) const { return {x * s, y * s}; }
    Point2 &operator+=(const Point2 &o) {
        x += o.x;
        y += o.y;
        return *this;
    }

    double norm() const { return std::hypot(x, y); }
    double squared_norm() const { return x * x + y * y; }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline Point2 operator*(double s, const Point2 &p) { return p * s; }

// Parameters of the general backward-distortion model: an odd polynomial in
// the incidence angle theta plus an odd polynomial in the radius, a rotation
// of the coordinates, and a decentering offset.
//
//   p_d = (1/r) * sum_j (k_j theta^(2j-1) + k'_j r^(2j-1)) * R_alpha * p + t0
//
// with theta = atan(r). Setting theta_coeffs to zero, radial_coeffs to
// [1,0,...], alpha to 0 and t0 to 0 yields the identity mapping.
struct DistortionParams {
    std::vector<double> theta_coeffs; // k_j, length order
    std::vector<double> radial_coeffs; // k'_j, length order
    double alpha = 0.0; // rotation angle, radians
    Point2 t0; // decentering offset, normalized units
    int order = 4;

    static DistortionParams identity(int order = 4);

    // Throws std::invalid_argument when the invariants do not hold
    // (order >= 1, coefficient lists of length order, all values finite).
    void validate() const;
};

void to_json(nlohmann::json &j, const DistortionParams &p);
// Requires exactly the keys theta_coeffs, radial_coeffs, alpha, t0, order;
// unknown keys are rejected.
void from_json(const nlohmann::json &j, DistortionParams &p);

// Mapping between pixel coordinates and the normalized image plane:
// x = (u - cx) / focal, y = (v - cy) / focal.
struct PixelFrame {
    double focal = 1.0;
    double cx = 0.0;
    double cy = 0.0;

    // Principal point at the pixel-lattice center, focal = min(w,h)/2.
    static PixelFrame standard(int width, int height);

    Point2 to_normalized(double u, double v) const {
        return {(u - cx) / focal, (v - cy) / focal};
    }
    Point2 to_pixel(const Point2 &p) const {
        return {p.x * focal + cx, p.y * focal + cy};
    }
};

// Dense per-pixel displacement, destination to source, in pixels.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<Point2> vectors; // row-major

    FlowField() = default;
    FlowField(int w, int h);

    Point2 &at(int x, int y) {
        return vectors[static_cast<std::size_t>(y) * width + x];
    }
    const Point2 &at(int x, int y) const {
        return vectors[static_cast<std::size_t>(y) * width + x];
    }
};

// General distortion model. At r = 0 the radial scale is continued as
// k_1 + k'_1, so the origin maps to t0.
Point2 distort_general(const Point2 &p, const DistortionParams &params);

// Task-specific reductions, implemented directly from their own formulas.
Point2 distort_kannala(const Point2 &p, const std::vector<double> &theta_coeffs);
Point2 distort_brown(const Point2 &p, const std::vector<double> &radial_coeffs);
Point2 distort_stitched(const Point2 &p, const std::vector<double> &radial_coeffs,
                        const Point2 &decenter);
Point2 distort_rotation(const Point2 &p, const std::vector<double> &radial_coeffs,
                        double alpha);

// Backward flow of the distortion: for each destination pixel stores
// (source - destination) in pixels, where source is the distorted location
// of the pixel's normalized coordinate.
FlowField distortion_flow(const DistortionParams &params, int width, int height,
                          const PixelFrame &frame);
FlowField distortion_flow(const DistortionParams &params, int width, int height);

// Inverts distort_general by a 1-D root find on the radial map (bisection
// then Newton, iteration cap 100). Requires the radial map to be strictly
// increasing over the working range; throws NoConvergenceError otherwise.
Point2 undistort_point(const Point2 &p_d, const DistortionParams &params,
                       double tol = 1e-10);

// Range-declared parameter sampling for the four synthesis tasks.
enum class Task { T1, T2, T3, T4 };

Task task_from_string(const std::string &name);
std::string task_name(Task task);

class Rng;
DistortionParams sample_task_params(Task task, Rng &rng);

} // namespace rectiwarp
