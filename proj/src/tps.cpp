#include "rectiwarp/tps.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rectiwarp/errors.hpp"
#include "rectiwarp/parallel.hpp"
#include "sampling_detail.hpp"

namespace rectiwarp {

double tps_kernel(double r) {
    // U(r) = r^2 log r; the limit at r = 0 is 0, stated explicitly so that
    // 0 * log 0 never produces a NaN.
    if (r <= 0.0) return 0.0;
    return r * r * std::log(r);
}

ControlGrid::ControlGrid(int c, int r, std::vector<Point2> pts)
    : cols(c), rows(r), points(std::move(pts)) {
    if (c <= 0 || r <= 0) {
        throw std::invalid_argument("ControlGrid: dimensions must be positive");
    }
    if (points.size() != static_cast<std::size_t>(c) * r) {
        throw std::invalid_argument("ControlGrid: point count must equal cols*rows");
    }
}

ControlGrid ControlGrid::basic(int cols, int rows) {
    if (cols < 2 || rows < 2) {
        throw std::invalid_argument("ControlGrid::basic: needs at least 2x2 points");
    }
    std::vector<Point2> pts;
    pts.reserve(static_cast<std::size_t>(cols) * rows);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            pts.emplace_back(pixel_to_norm(c, cols), pixel_to_norm(r, rows));
        }
    }
    return ControlGrid(cols, rows, std::move(pts));
}

ControlGrid ControlGrid::displaced(const std::vector<Point2> &offsets) const {
    if (offsets.size() != points.size()) {
        throw std::invalid_argument("ControlGrid::displaced: offset count mismatch");
    }
    ControlGrid out = *this;
    for (std::size_t i = 0; i < points.size(); ++i) {
        out.points[i] = points[i] + offsets[i];
    }
    return out;
}

void to_json(nlohmann::json &j, const ControlGrid &g) {
    nlohmann::json pts = nlohmann::json::array();
    for (const Point2 &p : g.points) {
        pts.push_back({p.x, p.y});
    }
    j = nlohmann::json{{"cols", g.cols}, {"rows", g.rows}, {"points", pts}};
}

void from_json(const nlohmann::json &j, ControlGrid &g) {
    const int cols = j.at("cols").get<int>();
    const int rows = j.at("rows").get<int>();
    std::vector<Point2> pts;
    for (const auto &p : j.at("points")) {
        const auto pair = p.get<std::vector<double>>();
        if (pair.size() != 2) {
            throw std::invalid_argument("ControlGrid: each point must be [x, y]");
        }
        pts.emplace_back(pair[0], pair[1]);
    }
    g = ControlGrid(cols, rows, std::move(pts));
}

SamplingGrid::SamplingGrid(int w, int h) : width(w), height(h) {
    if (w <= 0 || h <= 0) {
        throw std::invalid_argument("SamplingGrid: dimensions must be positive");
    }
    coords.assign(static_cast<std::size_t>(w) * h, Point2());
}

namespace {

// Assembles the (n+3)x(n+3) system [[K + lambda*I, P], [P^T, 0]] for the
// given source points.
Eigen::MatrixXd assemble_system(const std::vector<Point2> &src, double lambda) {
    const int n = static_cast<int>(src.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n + 3, n + 3);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            L(i, j) = tps_kernel((src[i] - src[j]).norm());
        }
        L(i, i) += lambda;
        L(i, n) = 1.0;
        L(i, n + 1) = src[i].x;
        L(i, n + 2) = src[i].y;
        L(n, i) = 1.0;
        L(n + 1, i) = src[i].x;
        L(n + 2, i) = src[i].y;
    }
    return L;
}

void check_conditioning(const Eigen::PartialPivLU<Eigen::MatrixXd> &lu) {
    const double rc = lu.rcond();
    if (!std::isfinite(rc) || rc < 1e-12) {
        throw DegenerateError("solve_tps: source configuration is numerically singular");
    }
}

} // namespace

TpsTransform solve_tps(const ControlGrid &sources, const ControlGrid &targets,
                       double lambda) {
    const int n = sources.count();
    if (n != targets.count()) {
        throw std::invalid_argument("solve_tps: source/target point counts differ");
    }
    if (n < 3) {
        throw std::invalid_argument("solve_tps: needs at least 3 control points");
    }
    if (lambda < 0.0 || !std::isfinite(lambda)) {
        throw std::invalid_argument("solve_tps: lambda must be finite and >= 0");
    }

    const Eigen::MatrixXd L = assemble_system(sources.points, lambda);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
    for (int i = 0; i < n; ++i) {
        rhs(i, 0) = targets.points[i].x;
        rhs(i, 1) = targets.points[i].y;
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(L);
    check_conditioning(lu);
    const Eigen::MatrixXd sol = lu.solve(rhs);
    if (!sol.allFinite()) {
        throw DegenerateError("solve_tps: non-finite solution");
    }

    TpsTransform t;
    t.sources = sources;
    t.kernel_weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        t.kernel_weights[i] = {sol(i, 0), sol(i, 1)};
    }
    t.affine = {sol(n + 1, 0), sol(n + 2, 0), sol(n, 0),
                sol(n + 1, 1), sol(n + 2, 1), sol(n, 1)};
    return t;
}

Point2 tps_evaluate(const TpsTransform &t, const Point2 &p) {
    double x = t.affine[0] * p.x + t.affine[1] * p.y + t.affine[2];
    double y = t.affine[3] * p.x + t.affine[4] * p.y + t.affine[5];
    const std::size_t n = t.kernel_weights.size();
    for (std::size_t j = 0; j < n; ++j) {
        const double u = tps_kernel((p - t.sources.points[j]).norm());
        x += t.kernel_weights[j].x * u;
        y += t.kernel_weights[j].y * u;
    }
    return {x, y};
}

SamplingGrid generate_grid(const TpsTransform &t, int width, int height) {
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("generate_grid: dimensions must be positive");
    }
    SamplingGrid grid(width, height);
    parallel_rows(height, [&](int y0, int y1) {
        for (int v = y0; v < y1; ++v) {
            for (int u = 0; u < width; ++u) {
                grid.at(u, v) =
                    tps_evaluate(t, {pixel_to_norm(u, width), pixel_to_norm(v, height)});
            }
        }
    });
    return grid;
}

std::vector<double> tps_influence_matrix(const ControlGrid &sources,
                                         const std::vector<Point2> &samples,
                                         double lambda) {
    const int n = sources.count();
    if (n < 3) {
        throw std::invalid_argument("tps_influence_matrix: needs at least 3 controls");
    }
    const Eigen::MatrixXd L = assemble_system(sources.points, lambda);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(L);
    check_conditioning(lu);
    // Only the first n columns of the inverse matter: the right-hand side
    // is zero in its last three rows.
    const Eigen::MatrixXd inv_left = lu.inverse().leftCols(n);

    const int m = static_cast<int>(samples.size());
    std::vector<double> influence(static_cast<std::size_t>(m) * n);
    parallel_rows(m, [&](int i0, int i1) {
        Eigen::RowVectorXd e(n + 3);
        for (int i = i0; i < i1; ++i) {
            for (int j = 0; j < n; ++j) {
                e(j) = tps_kernel((samples[i] - sources.points[j]).norm());
            }
            e(n) = 1.0;
            e(n + 1) = samples[i].x;
            e(n + 2) = samples[i].y;
            Eigen::Map<Eigen::RowVectorXd>(influence.data() +
                                               static_cast<std::size_t>(i) * n,
                                           n) = e * inv_left;
        }
    });
    return influence;
}

SampleResult bilinear_sample(const Image &image, const SamplingGrid &grid) {
    if (image.width <= 0 || image.height <= 0) {
        throw std::invalid_argument("bilinear_sample: empty image");
    }
    SampleResult out{Image(grid.width, grid.height, image.channels, 0.0),
                     Mask(grid.width, grid.height, 0)};
    const int W = image.width;
    const int H = image.height;
    parallel_rows(grid.height, [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < grid.width; ++x) {
                Point2 c = grid.at(x, y);
                if (!detail::snap_into_square(c, W, H)) {
                    continue; // out of range: value 0, mask 0
                }
                double px = norm_to_pixel(c.x, W);
                double py = norm_to_pixel(c.y, H);
                // Snap coordinates within 1e-9 px of the integer lattice so
                // that identity warps reproduce the input bit-for-bit.
                const double rx = std::nearbyint(px);
                if (std::abs(px - rx) <= 1e-9) px = rx;
                const double ry = std::nearbyint(py);
                if (std::abs(py - ry) <= 1e-9) py = ry;
                int x0 = static_cast<int>(std::floor(px));
                int y0c = static_cast<int>(std::floor(py));
                x0 = std::clamp(x0, 0, std::max(W - 2, 0));
                y0c = std::clamp(y0c, 0, std::max(H - 2, 0));
                const int x1 = std::min(x0 + 1, W - 1);
                const int y1c = std::min(y0c + 1, H - 1);
                const double fx = px - x0;
                const double fy = py - y0c;
                const double w00 = (1.0 - fx) * (1.0 - fy);
                const double w10 = fx * (1.0 - fy);
                const double w01 = (1.0 - fx) * fy;
                const double w11 = fx * fy;
                for (int ch = 0; ch < image.channels; ++ch) {
                    out.image.at(x, y, ch) = w00 * image.at(x0, y0c, ch) +
                                             w10 * image.at(x1, y0c, ch) +
                                             w01 * image.at(x0, y1c, ch) +
                                             w11 * image.at(x1, y1c, ch);
                }
                out.mask.at(x, y) = 1;
            }
        }
    });
    return out;
}

Mask warp_mask(const Mask &mask, const SamplingGrid &grid) {
    Image as_image(mask.width, mask.height, 1, 0.0);
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        as_image.data[i] = mask.data[i] ? 1.0 : 0.0;
    }
    const SampleResult sampled = bilinear_sample(as_image, grid);
    Mask out(grid.width, grid.height, 0);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = (sampled.mask.data[i] && sampled.image.data[i] >= 0.5) ? 1 : 0;
    }
    return out;
}

RpTpsResult rp_tps_apply(const Image &x0, const Mask &m0, const ControlGrid &c0,
                         const std::vector<Point2> &delta1,
                         const std::vector<Point2> &delta2, double lambda) {
    if (m0.width != x0.width || m0.height != x0.height) {
        throw std::invalid_argument("rp_tps_apply: image/mask dimensions differ");
    }
    RpTpsResult res;
    res.c1 = c0.displaced(delta1);
    res.c2 = res.c1.displaced(delta2);

    // Stage one: warp the foremost input by c0 -> c1.
    const SamplingGrid g1 = generate_grid(solve_tps(c0, res.c1, lambda),
                                          x0.width, x0.height);
    SampleResult s1 = bilinear_sample(x0, g1);
    res.x1 = std::move(s1.image);
    res.m1 = warp_mask(m0, g1);

    // Stage two: again from the foremost input, never from x1, with the
    // refined targets c2.
    const SamplingGrid g2 = generate_grid(solve_tps(c0, res.c2, lambda),
                                          x0.width, x0.height);
    SampleResult s2 = bilinear_sample(x0, g2);
    res.xd = std::move(s2.image);
    res.md = warp_mask(m0, g2);
    return res;
}

} // namespace rectiwarp
