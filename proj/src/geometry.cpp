#include "rectiwarp/geometry.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rectiwarp/errors.hpp"
#include "rectiwarp/parallel.hpp"
#include "rectiwarp/rng.hpp"

namespace rectiwarp {

namespace {

// sum_j c_j t^(2j-1) = t * sum_j c_j (t^2)^(j-1), evaluated by Horner's
// rule on t^2.
double odd_poly(const std::vector<double> &coeffs, double t) {
    const double t2 = t * t;
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
        acc = acc * t2 + *it;
    }
    return t * acc;
}

// d/dt sum_j c_j t^(2j-1) = sum_j (2j-1) c_j t^(2j-2).
double odd_poly_deriv(const std::vector<double> &coeffs, double t) {
    const double t2 = t * t;
    double acc = 0.0;
    for (std::size_t idx = coeffs.size(); idx-- > 0;) {
        const double exponent_coeff = static_cast<double>(2 * idx + 1);
        acc = acc * t2 + exponent_coeff * coeffs[idx];
    }
    return acc;
}

// Signed radial map g(r) = sum_j k_j theta^(2j-1) + k'_j r^(2j-1) with
// theta = atan(r); the distorted radius of a point at radius r.
double radial_map(const DistortionParams &params, double r) {
    return odd_poly(params.theta_coeffs, std::atan(r)) +
           odd_poly(params.radial_coeffs, r);
}

double radial_map_deriv(const DistortionParams &params, double r) {
    const double theta = std::atan(r);
    return odd_poly_deriv(params.theta_coeffs, theta) / (1.0 + r * r) +
           odd_poly_deriv(params.radial_coeffs, r);
}

void require_finite(const Point2 &p, const char *who) {
    if (!p.finite()) {
        throw std::invalid_argument(std::string(who) + ": non-finite input point");
    }
}

Point2 rotate(const Point2 &p, double alpha) {
    const double c = std::cos(alpha);
    const double s = std::sin(alpha);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

} // namespace

DistortionParams DistortionParams::identity(int order) {
    DistortionParams p;
    p.order = order;
    p.theta_coeffs.assign(static_cast<std::size_t>(order), 0.0);
    p.radial_coeffs.assign(static_cast<std::size_t>(order), 0.0);
    p.radial_coeffs[0] = 1.0;
    return p;
}

void DistortionParams::validate() const {
    if (order < 1) {
        throw std::invalid_argument("DistortionParams: order must be >= 1");
    }
    if (theta_coeffs.size() != static_cast<std::size_t>(order) ||
        radial_coeffs.size() != static_cast<std::size_t>(order)) {
        throw std::invalid_argument(
            "DistortionParams: coefficient lists must have length equal to order");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(theta_coeffs.begin(), theta_coeffs.end(), finite) ||
        !std::all_of(radial_coeffs.begin(), radial_coeffs.end(), finite) ||
        !std::isfinite(alpha) || !t0.finite()) {
        throw std::invalid_argument("DistortionParams: all values must be finite");
    }
}

void to_json(nlohmann::json &j, const DistortionParams &p) {
    j = nlohmann::json{{"theta_coeffs", p.theta_coeffs},
                       {"radial_coeffs", p.radial_coeffs},
                       {"alpha", p.alpha},
                       {"t0", {p.t0.x, p.t0.y}},
                       {"order", p.order}};
}

void from_json(const nlohmann::json &j, DistortionParams &p) {
    static const char *const known[] = {"theta_coeffs", "radial_coeffs", "alpha",
                                        "t0", "order"};
    if (!j.is_object()) {
        throw std::invalid_argument("DistortionParams: expected a JSON object");
    }
    for (const auto &item : j.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char *k) {
                return item.key() == k;
            }) == std::end(known)) {
            throw std::invalid_argument("DistortionParams: unknown key '" +
                                        item.key() + "'");
        }
    }
    for (const char *k : known) {
        if (!j.contains(k)) {
            throw std::invalid_argument(std::string("DistortionParams: missing key '") +
                                        k + "'");
        }
    }
    p.theta_coeffs = j.at("theta_coeffs").get<std::vector<double>>();
    p.radial_coeffs = j.at("radial_coeffs").get<std::vector<double>>();
    p.alpha = j.at("alpha").get<double>();
    const auto t0 = j.at("t0").get<std::vector<double>>();
    if (t0.size() != 2) {
        throw std::invalid_argument("DistortionParams: t0 must be a 2-element array");
    }
    p.t0 = Point2(t0[0], t0[1]);
    p.order = j.at("order").get<int>();
    p.validate();
}

PixelFrame PixelFrame::standard(int width, int height) {
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("PixelFrame: dimensions must be positive");
    }
    PixelFrame f;
    f.focal = std::min(width, height) / 2.0;
    f.cx = (width - 1) / 2.0;
    f.cy = (height - 1) / 2.0;
    return f;
}

FlowField::FlowField(int w, int h) : width(w), height(h) {
    if (w <= 0 || h <= 0) {
        throw std::invalid_argument("FlowField: dimensions must be positive");
    }
    vectors.assign(static_cast<std::size_t>(w) * h, Point2());
}

Point2 distort_general(const Point2 &p, const DistortionParams &params) {
    require_finite(p, "distort_general");
    params.validate();
    const double r = p.norm();
    const Point2 rotated = rotate(p, params.alpha);
    if (r == 0.0) {
        // lim_{r->0} g(r)/r = k_1 + k'_1: the scale continues smoothly and
        // the origin maps to t0.
        return params.t0;
    }
    const double scale = radial_map(params, r) / r;
    return scale * rotated + params.t0;
}

Point2 distort_kannala(const Point2 &p, const std::vector<double> &theta_coeffs) {
    require_finite(p, "distort_kannala");
    if (theta_coeffs.empty()) {
        throw std::invalid_argument("distort_kannala: empty coefficient list");
    }
    const double r = p.norm();
    if (r == 0.0) return {0.0, 0.0};
    const double rd = odd_poly(theta_coeffs, std::atan(r));
    return (rd / r) * p;
}

Point2 distort_brown(const Point2 &p, const std::vector<double> &radial_coeffs) {
    require_finite(p, "distort_brown");
    if (radial_coeffs.empty()) {
        throw std::invalid_argument("distort_brown: empty coefficient list");
    }
    const double r = p.norm();
    if (r == 0.0) return {0.0, 0.0};
    const double rd = odd_poly(radial_coeffs, r);
    return (rd / r) * p;
}

Point2 distort_stitched(const Point2 &p, const std::vector<double> &radial_coeffs,
                        const Point2 &decenter) {
    return distort_brown(p, radial_coeffs) + decenter;
}

Point2 distort_rotation(const Point2 &p, const std::vector<double> &radial_coeffs,
                        double alpha) {
    require_finite(p, "distort_rotation");
    if (radial_coeffs.empty()) {
        throw std::invalid_argument("distort_rotation: empty coefficient list");
    }
    const double r = p.norm();
    if (r == 0.0) return {0.0, 0.0};
    const double rd = odd_poly(radial_coeffs, r);
    return (rd / r) * rotate(p, alpha);
}

FlowField distortion_flow(const DistortionParams &params, int width, int height,
                          const PixelFrame &frame) {
    params.validate();
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("distortion_flow: dimensions must be positive");
    }
    if (!(frame.focal > 0.0) || !std::isfinite(frame.focal) ||
        !std::isfinite(frame.cx) || !std::isfinite(frame.cy)) {
        throw std::invalid_argument("distortion_flow: degenerate pixel geometry");
    }
    FlowField flow(width, height);
    parallel_rows(height, [&](int y0, int y1) {
        for (int v = y0; v < y1; ++v) {
            for (int u = 0; u < width; ++u) {
                const Point2 p = frame.to_normalized(u, v);
                const Point2 src = frame.to_pixel(distort_general(p, params));
                flow.at(u, v) = {src.x - u, src.y - v};
            }
        }
    });
    return flow;
}

FlowField distortion_flow(const DistortionParams &params, int width, int height) {
    return distortion_flow(params, width, height, PixelFrame::standard(width, height));
}

Point2 undistort_point(const Point2 &p_d, const DistortionParams &params,
                       double tol) {
    require_finite(p_d, "undistort_point");
    params.validate();
    const Point2 q = p_d - params.t0;
    const double target = q.norm();
    if (target == 0.0) return {0.0, 0.0};

    // Bracket the root of g(r) = target, expanding the upper end.
    double lo = 0.0;
    double hi = std::max(target, 1e-3);
    int expansions = 0;
    while (radial_map(params, hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (++expansions > 64) {
            throw NoConvergenceError(
                "undistort_point: radial map never reaches the requested radius");
        }
    }

    // The inverse is only meaningful when r -> g(r) is strictly increasing
    // over the working range.
    const int kProbes = 64;
    for (int i = 0; i <= kProbes; ++i) {
        const double r = hi * i / kProbes;
        if (radial_map_deriv(params, r) <= 0.0) {
            throw NoConvergenceError(
                "undistort_point: radial map is not strictly increasing");
        }
    }

    double r = 0.5 * (lo + hi);
    for (int iter = 0; iter < 100; ++iter) {
        const double g = radial_map(params, r);
        if (std::abs(g - target) <= tol) {
            const Point2 dir = q * (1.0 / target);
            return r * rotate(dir, -params.alpha);
        }
        if (g < target) {
            lo = r;
        } else {
            hi = r;
        }
        const double dg = radial_map_deriv(params, r);
        double next = r - (g - target) / dg;
        if (!(next > lo) || !(next < hi)) {
            next = 0.5 * (lo + hi);
        }
        r = next;
    }
    throw NoConvergenceError("undistort_point: no convergence within 100 iterations");
}

Task task_from_string(const std::string &name) {
    if (name == "t1") return Task::T1;
    if (name == "t2") return Task::T2;
    if (name == "t3") return Task::T3;
    if (name == "t4") return Task::T4;
    throw std::invalid_argument("unknown task '" + name + "' (expected t1..t4)");
}

std::string task_name(Task task) {
    switch (task) {
    case Task::T1: return "t1";
    case Task::T2: return "t2";
    case Task::T3: return "t3";
    case Task::T4: return "t4";
    }
    throw std::invalid_argument("task_name: invalid task");
}

DistortionParams sample_task_params(Task task, Rng &rng) {
    DistortionParams p;
    p.order = 2;
    p.theta_coeffs = {0.0, 0.0};
    p.radial_coeffs = {0.0, 0.0};
    switch (task) {
    case Task::T1:
        p.theta_coeffs[0] = rng.uniform(0.9, 1.1);
        p.theta_coeffs[1] = rng.uniform(-0.05, 0.05);
        break;
    case Task::T2:
        p.radial_coeffs[0] = rng.uniform(0.95, 1.1);
        p.radial_coeffs[1] = rng.uniform(-0.1, 0.1);
        break;
    case Task::T3:
        p.radial_coeffs[0] = rng.uniform(0.95, 1.1);
        p.radial_coeffs[1] = rng.uniform(-0.1, 0.1);
        p.t0.x = rng.uniform(-0.1, 0.1);
        p.t0.y = rng.uniform(-0.1, 0.1);
        break;
    case Task::T4:
        p.radial_coeffs[0] = 1.0;
        p.alpha = rng.uniform(-10.0, 10.0) * std::numbers::pi / 180.0;
        break;
    }
    return p;
}

} // namespace rectiwarp
