#include "rectiwarp/losses.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rectiwarp {

void LossWeights::validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!ok(gamma) || !ok(alpha1) || !ok(alpha2) || !ok(alpha3)) {
        throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
    }
}

void to_json(nlohmann::json &j, const LossReport &r) {
    nlohmann::json stages = nlohmann::json::array();
    for (const StageLoss &s : r.stages) {
        stages.push_back({{"appearance", s.appearance},
                          {"boundary", s.boundary},
                          {"mesh", s.mesh},
                          {"gradient", s.gradient}});
    }
    j = nlohmann::json{{"stages", stages},
                       {"boundary_changing", r.boundary_changing},
                       {"total", r.total}};
}

std::vector<Point2> perimeter_points(const ControlGrid &grid) {
    std::vector<Point2> out;
    out.reserve(static_cast<std::size_t>(2 * (grid.cols + grid.rows) - 4));
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            if (r == 0 || r == grid.rows - 1 || c == 0 || c == grid.cols - 1) {
                out.push_back(grid.at(c, r));
            }
        }
    }
    return out;
}

double boundary_loss(const std::vector<Point2> &outer_points, const LevelSet &ls) {
    if (outer_points.empty()) {
        throw std::invalid_argument("boundary_loss: empty point list");
    }
    return ls.penalty(outer_points);
}

namespace {

void require_metric_shapes(const Image &a, const Image &b, const Mask &valid,
                           const char *who) {
    if (!a.same_shape(b) || valid.width != a.width || valid.height != a.height) {
        throw std::invalid_argument(std::string(who) + ": shape mismatch");
    }
}

} // namespace

double appearance_loss(const Image &a, const Image &b, const Mask &valid) {
    require_metric_shapes(a, b, valid, "appearance_loss");
    double sum = 0.0;
    std::size_t terms = 0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            if (!valid.at(x, y)) continue;
            for (int c = 0; c < a.channels; ++c) {
                sum += std::abs(a.at(x, y, c) - b.at(x, y, c));
            }
            terms += static_cast<std::size_t>(a.channels);
        }
    }
    return terms ? sum / static_cast<double>(terms) : 0.0;
}

double gradient_loss(const Image &a, const Image &b, const Mask &valid) {
    require_metric_shapes(a, b, valid, "gradient_loss");
    double sum = 0.0;
    std::size_t terms = 0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            if (!valid.at(x, y)) continue;
            if (x + 1 < a.width && valid.at(x + 1, y)) {
                for (int c = 0; c < a.channels; ++c) {
                    const double ga = a.at(x + 1, y, c) - a.at(x, y, c);
                    const double gb = b.at(x + 1, y, c) - b.at(x, y, c);
                    sum += std::abs(ga - gb);
                }
                terms += static_cast<std::size_t>(a.channels);
            }
            if (y + 1 < a.height && valid.at(x, y + 1)) {
                for (int c = 0; c < a.channels; ++c) {
                    const double ga = a.at(x, y + 1, c) - a.at(x, y, c);
                    const double gb = b.at(x, y + 1, c) - b.at(x, y, c);
                    sum += std::abs(ga - gb);
                }
                terms += static_cast<std::size_t>(a.channels);
            }
        }
    }
    return terms ? sum / static_cast<double>(terms) : 0.0;
}

namespace {

double triple_penalty(const Point2 &a, const Point2 &b, const Point2 &c) {
    const Point2 e1 = b - a;
    const Point2 e2 = c - b;
    const double denom = e1.norm() * e2.norm();
    if (denom < 1e-300) return 1.0; // collapsed edge: maximal kink
    const double cosang = (e1.x * e2.x + e1.y * e2.y) / denom;
    return 1.0 - cosang;
}

} // namespace

double line_penalty(const ControlGrid &grid) {
    double sum = 0.0;
    std::size_t count = 0;
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 1; c + 1 < grid.cols; ++c) {
            sum += triple_penalty(grid.at(c - 1, r), grid.at(c, r), grid.at(c + 1, r));
            ++count;
        }
    }
    for (int c = 0; c < grid.cols; ++c) {
        for (int r = 1; r + 1 < grid.rows; ++r) {
            sum += triple_penalty(grid.at(c, r - 1), grid.at(c, r), grid.at(c, r + 1));
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

double shape_penalty(const ControlGrid &grid, const ControlGrid &reference) {
    if (!grid.same_shape(reference)) {
        throw std::invalid_argument("shape_penalty: grid shapes differ");
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (int r = 0; r + 1 < grid.rows; ++r) {
        for (int c = 0; c + 1 < grid.cols; ++c) {
            const Point2 R[4] = {reference.at(c, r), reference.at(c + 1, r),
                                 reference.at(c, r + 1), reference.at(c + 1, r + 1)};
            const Point2 D[4] = {grid.at(c, r), grid.at(c + 1, r),
                                 grid.at(c, r + 1), grid.at(c + 1, r + 1)};
            Point2 rc{0, 0}, dc{0, 0};
            for (int i = 0; i < 4; ++i) {
                rc += R[i] * 0.25;
                dc += D[i] * 0.25;
            }
            // Closed-form least-squares similarity (a -b; b a) + t from the
            // centered reference corners to the centered deformed corners.
            double denom = 0.0, na = 0.0, nb = 0.0;
            for (int i = 0; i < 4; ++i) {
                const Point2 rr = R[i] - rc;
                const Point2 dd = D[i] - dc;
                denom += rr.squared_norm();
                na += rr.x * dd.x + rr.y * dd.y;
                nb += rr.x * dd.y - rr.y * dd.x;
            }
            if (denom < 1e-300) continue; // degenerate reference quad
            const double a = na / denom;
            const double b = nb / denom;
            double res2 = 0.0;
            for (int i = 0; i < 4; ++i) {
                const Point2 rr = R[i] - rc;
                const Point2 fitted{a * rr.x - b * rr.y + dc.x,
                                    b * rr.x + a * rr.y + dc.y};
                res2 += (D[i] - fitted).squared_norm();
            }
            const double scale = std::sqrt(denom / 4.0);
            sum += std::sqrt(res2 / 4.0) / scale;
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

double total_loss(const std::array<StageLoss, 2> &stages, const LossWeights &w,
                  bool boundary_changing) {
    w.validate();
    auto stage_term = [&](const StageLoss &s) {
        if (!boundary_changing) return s.appearance;
        return s.appearance + w.alpha1 * s.boundary + w.alpha2 * s.mesh +
               w.alpha3 * s.gradient;
    };
    return stage_term(stages[0]) + w.gamma * stage_term(stages[1]);
}

LossReport make_report(const std::array<StageLoss, 2> &stages, const LossWeights &w,
                       bool boundary_changing) {
    LossReport r;
    r.stages = stages;
    r.boundary_changing = boundary_changing;
    r.total = total_loss(stages, w, boundary_changing);
    return r;
}

} // namespace rectiwarp
