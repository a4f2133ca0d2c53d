#include "rectiwarp/fitter.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rectiwarp/errors.hpp"
#include "rectiwarp/parallel.hpp"
#include "sampling_detail.hpp"

namespace rectiwarp {

void FitConfig::validate() const {
    if (stages != 2) {
        throw std::invalid_argument("FitConfig: stages is fixed at 2");
    }
    if (max_iters < 1) {
        throw std::invalid_argument("FitConfig: max_iters must be >= 1");
    }
    if (!(initial_step > 0.0) || !std::isfinite(initial_step)) {
        throw std::invalid_argument("FitConfig: initial_step must be positive");
    }
    if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
        throw std::invalid_argument("FitConfig: tolerance must be positive");
    }
    if (grid_cols < 2 || grid_rows < 2) {
        throw std::invalid_argument("FitConfig: grid must be at least 2x2");
    }
    if (lambda < 0.0 || !std::isfinite(lambda)) {
        throw std::invalid_argument("FitConfig: lambda must be finite and >= 0");
    }
}

void to_json(nlohmann::json &j, const FitConfig &c) {
    j = nlohmann::json{{"stages", c.stages},
                       {"max_iters", c.max_iters},
                       {"initial_step", c.initial_step},
                       {"tolerance", c.tolerance},
                       {"seed", c.seed},
                       {"grid_cols", c.grid_cols},
                       {"grid_rows", c.grid_rows},
                       {"lambda", c.lambda}};
}

void from_json(const nlohmann::json &j, FitConfig &c) {
    static const char *const known[] = {"stages", "max_iters", "initial_step",
                                        "tolerance", "seed", "grid_cols",
                                        "grid_rows", "lambda"};
    if (!j.is_object()) {
        throw std::invalid_argument("FitConfig: expected a JSON object");
    }
    for (const auto &item : j.items()) {
        bool ok = false;
        for (const char *k : known) ok = ok || item.key() == k;
        if (!ok) {
            throw std::invalid_argument("FitConfig: unknown key '" + item.key() + "'");
        }
    }
    c = FitConfig{};
    if (j.contains("stages")) c.stages = j.at("stages").get<int>();
    if (j.contains("max_iters")) c.max_iters = j.at("max_iters").get<int>();
    if (j.contains("initial_step")) c.initial_step = j.at("initial_step").get<double>();
    if (j.contains("tolerance")) c.tolerance = j.at("tolerance").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("grid_cols")) c.grid_cols = j.at("grid_cols").get<int>();
    if (j.contains("grid_rows")) c.grid_rows = j.at("grid_rows").get<int>();
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    c.validate();
}

void to_json(nlohmann::json &j, const FitResult &r) {
    nlohmann::json report;
    to_json(report, r.report);
    nlohmann::json c1, c2;
    to_json(c1, r.c1);
    to_json(c2, r.c2);
    j = nlohmann::json{{"c1", c1},
                       {"c2", c2},
                       {"report", report},
                       {"loss_trace", {r.loss_trace[0], r.loss_trace[1]}},
                       {"iterations", {r.iterations[0], r.iterations[1]}}};
}

ControlGrid fit_from_flow(const FlowField &flow, int cols, int rows, double lambda) {
    if (flow.width <= 0 || flow.height <= 0) {
        throw std::invalid_argument("fit_from_flow: empty flow");
    }
    for (const Point2 &v : flow.vectors) {
        if (!v.finite()) {
            throw std::invalid_argument("fit_from_flow: non-finite flow vector");
        }
    }
    const ControlGrid c0 = ControlGrid::basic(cols, rows);
    const int n = c0.count();
    const int W = flow.width;
    const int H = flow.height;
    const std::size_t N = static_cast<std::size_t>(W) * H;

    std::vector<Point2> samples(N);
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(N), 2);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * W + x;
            samples[i] = {pixel_to_norm(x, W), pixel_to_norm(y, H)};
            const Point2 &f = flow.at(x, y);
            Y(static_cast<Eigen::Index>(i), 0) = pixel_to_norm(x + f.x, W);
            Y(static_cast<Eigen::Index>(i), 1) = pixel_to_norm(y + f.y, H);
        }
    }

    const std::vector<double> psi = tps_influence_matrix(c0, samples, lambda);
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> Psi(psi.data(), static_cast<Eigen::Index>(N), n);

    const Eigen::MatrixXd A = Psi.transpose() * Psi;
    const Eigen::MatrixXd B = Psi.transpose() * Y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    const double rc = ldlt.rcond();
    if (ldlt.info() != Eigen::Success || !std::isfinite(rc) || rc < 1e-14) {
        throw DegenerateError("fit_from_flow: rank-deficient least-squares design");
    }
    const Eigen::MatrixXd T = ldlt.solve(B);
    if (!T.allFinite()) {
        throw DegenerateError("fit_from_flow: non-finite solution");
    }

    std::vector<Point2> pts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        pts[static_cast<std::size_t>(i)] = {T(i, 0), T(i, 1)};
    }
    return ControlGrid(cols, rows, std::move(pts));
}

std::vector<Point2> finite_diff_gradient(
    const std::function<double(const ControlGrid &)> &loss_fn,
    const ControlGrid &grid, double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw std::invalid_argument("finite_diff_gradient: eps must be positive");
    }
    ControlGrid work = grid;
    std::vector<Point2> grads(work.points.size());
    for (std::size_t i = 0; i < work.points.size(); ++i) {
        for (int axis = 0; axis < 2; ++axis) {
            double &coord = axis == 0 ? work.points[i].x : work.points[i].y;
            const double saved = coord;
            coord = saved + eps;
            const double lp = loss_fn(work);
            coord = saved - eps;
            const double lm = loss_fn(work);
            coord = saved;
            const double g = (lp - lm) / (2.0 * eps);
            (axis == 0 ? grads[i].x : grads[i].y) = g;
        }
    }
    return grads;
}

namespace {

void check_residual_args(const ControlGrid &sources,
                         const std::vector<Point2> &samples,
                         const std::vector<Point2> &targets,
                         const ControlGrid &candidate) {
    if (samples.empty() || samples.size() != targets.size()) {
        throw std::invalid_argument(
            "warp residual: samples and targets must be nonempty and equal-length");
    }
    if (candidate.count() != sources.count()) {
        throw std::invalid_argument("warp residual: candidate/source count mismatch");
    }
}

} // namespace

double warp_residual_loss(const ControlGrid &sources,
                          const std::vector<Point2> &samples,
                          const std::vector<Point2> &targets,
                          const ControlGrid &candidate, double lambda) {
    check_residual_args(sources, samples, targets, candidate);
    const std::vector<double> psi = tps_influence_matrix(sources, samples, lambda);
    const int n = sources.count();
    const std::size_t m = samples.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double wx = 0.0, wy = 0.0;
        const double *row = psi.data() + i * n;
        for (int j = 0; j < n; ++j) {
            wx += row[j] * candidate.points[static_cast<std::size_t>(j)].x;
            wy += row[j] * candidate.points[static_cast<std::size_t>(j)].y;
        }
        const double rx = wx - targets[i].x;
        const double ry = wy - targets[i].y;
        acc += rx * rx + ry * ry;
    }
    return acc / static_cast<double>(m);
}

std::vector<Point2> warp_residual_gradient(const ControlGrid &sources,
                                           const std::vector<Point2> &samples,
                                           const std::vector<Point2> &targets,
                                           const ControlGrid &candidate,
                                           double lambda) {
    check_residual_args(sources, samples, targets, candidate);
    const std::vector<double> psi = tps_influence_matrix(sources, samples, lambda);
    const int n = sources.count();
    const std::size_t m = samples.size();
    std::vector<Point2> grad(static_cast<std::size_t>(n), Point2{0.0, 0.0});
    const double scale = 2.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        double wx = 0.0, wy = 0.0;
        const double *row = psi.data() + i * n;
        for (int j = 0; j < n; ++j) {
            wx += row[j] * candidate.points[static_cast<std::size_t>(j)].x;
            wy += row[j] * candidate.points[static_cast<std::size_t>(j)].y;
        }
        const double rx = wx - targets[i].x;
        const double ry = wy - targets[i].y;
        for (int j = 0; j < n; ++j) {
            grad[static_cast<std::size_t>(j)].x += scale * row[j] * rx;
            grad[static_cast<std::size_t>(j)].y += scale * row[j] * ry;
        }
    }
    return grad;
}

double sampling_loss(const Image &x0, const Image &ref, const ControlGrid &c0,
                     const ControlGrid &candidate, double lambda) {
    if (!x0.same_shape(ref)) {
        throw std::invalid_argument("sampling_loss: image shapes differ");
    }
    const TpsTransform t = solve_tps(c0, candidate, lambda);
    const SamplingGrid grid = generate_grid(t, x0.width, x0.height);
    const SampleResult s = bilinear_sample(x0, grid);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.image.data.size(); ++i) {
        const double d = s.image.data[i] - ref.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(s.image.data.size());
}

std::vector<Point2> sampling_loss_gradient(const Image &x0, const Image &ref,
                                           const ControlGrid &c0,
                                           const ControlGrid &candidate,
                                           double lambda) {
    if (!x0.same_shape(ref)) {
        throw std::invalid_argument("sampling_loss_gradient: image shapes differ");
    }
    const int W = x0.width;
    const int H = x0.height;
    const int C = x0.channels;
    const int n = c0.count();
    const std::size_t N = static_cast<std::size_t>(W) * H;

    const TpsTransform t = solve_tps(c0, candidate, lambda);
    const SamplingGrid grid = generate_grid(t, W, H);

    std::vector<Point2> samples(N);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            samples[static_cast<std::size_t>(y) * W + x] = {pixel_to_norm(x, W),
                                                            pixel_to_norm(y, H)};
        }
    }
    const std::vector<double> psi = tps_influence_matrix(c0, samples, lambda);

    const double terms = static_cast<double>(N) * C;
    const double sx = (W - 1) / 2.0; // d(pixel x)/d(normalized x)
    const double sy = (H - 1) / 2.0;
    std::vector<Point2> grad(static_cast<std::size_t>(n), Point2{0.0, 0.0});

    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * W + x;
            Point2 c = grid.coords[i];
            if (!detail::snap_into_square(c, W, H)) {
                continue; // out of range: value pinned at 0, zero gradient
            }
            double px = norm_to_pixel(c.x, W);
            double py = norm_to_pixel(c.y, H);
            const double rx = std::nearbyint(px);
            if (std::abs(px - rx) <= 1e-9) px = rx;
            const double ry = std::nearbyint(py);
            if (std::abs(py - ry) <= 1e-9) py = ry;
            int x0i = static_cast<int>(std::floor(px));
            int y0i = static_cast<int>(std::floor(py));
            x0i = std::clamp(x0i, 0, std::max(W - 2, 0));
            y0i = std::clamp(y0i, 0, std::max(H - 2, 0));
            const int x1i = std::min(x0i + 1, W - 1);
            const int y1i = std::min(y0i + 1, H - 1);
            const double fx = px - x0i;
            const double fy = py - y0i;
            double gx = 0.0, gy = 0.0;
            for (int ch = 0; ch < C; ++ch) {
                const double v00 = x0.at(x0i, y0i, ch);
                const double v10 = x0.at(x1i, y0i, ch);
                const double v01 = x0.at(x0i, y1i, ch);
                const double v11 = x0.at(x1i, y1i, ch);
                const double val = (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 +
                                   (1.0 - fx) * fy * v01 + fx * fy * v11;
                const double err = val - ref.at(x, y, ch);
                const double dval_dpx = (v10 - v00) * (1.0 - fy) + (v11 - v01) * fy;
                const double dval_dpy = (v01 - v00) * (1.0 - fx) + (v11 - v10) * fx;
                gx += 2.0 * err * dval_dpx;
                gy += 2.0 * err * dval_dpy;
            }
            gx *= sx / terms;
            gy *= sy / terms;
            const double *row = psi.data() + i * n;
            for (int j = 0; j < n; ++j) {
                grad[static_cast<std::size_t>(j)].x += row[j] * gx;
                grad[static_cast<std::size_t>(j)].y += row[j] * gy;
            }
        }
    }
    return grad;
}

namespace {

double cross_z(const Point2 &a, const Point2 &b) { return a.x * b.y - a.y * b.x; }

// A candidate grid is usable only if every mesh cell keeps positive
// orientation at all four corners (no fold-over).
bool fold_free(const ControlGrid &g) {
    for (int r = 0; r + 1 < g.rows; ++r) {
        for (int c = 0; c + 1 < g.cols; ++c) {
            const Point2 &a = g.at(c, r);
            const Point2 &b = g.at(c + 1, r);
            const Point2 &d = g.at(c, r + 1);
            const Point2 &e = g.at(c + 1, r + 1);
            if (cross_z(b - a, d - a) <= 0.0) return false;
            if (cross_z(e - b, a - b) <= 0.0) return false;
            if (cross_z(d - e, b - e) <= 0.0) return false;
            if (cross_z(a - d, e - d) <= 0.0) return false;
        }
    }
    return true;
}

struct FitWorkspace {
    const Image *x0 = nullptr;
    const Image *ref = nullptr; // may be null
    const LevelSet *ls = nullptr; // may be null
    const LossWeights *w = nullptr;
    bool boundary_changing = false;
    bool m0_all_ones = false;

    int W = 0, H = 0, C = 0, n = 0;
    ControlGrid c0;
    std::vector<double> psi; // N x n influence of targets on pixel coords
    std::vector<Point2> coords; // current per-pixel source coordinates
    Image m0_values; // mask as 1-channel image, for warping
    Image sampled; // scratch: warped x0
    Mask valid; // scratch: warped validity

    // Warps x0 (and the validity mask) through the current coordinates,
    // with an optional on-the-fly displacement of control j along one axis.
    void resample(int j, int axis, double delta) {
        const int width = W, height = H, chans = C;
        auto rows = [&](int yb, int ye) {
            for (int y = yb; y < ye; ++y) {
                for (int x = 0; x < width; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * width + x;
                    Point2 s = coords[i];
                    if (j >= 0) {
                        const double shift = delta * psi[i * n + j];
                        if (axis == 0) s.x += shift; else s.y += shift;
                    }
                    if (!detail::snap_into_square(s, width, height)) {
                        valid.data[i] = 0;
                        for (int ch = 0; ch < chans; ++ch) sampled.data[i * chans + ch] = 0.0;
                        continue;
                    }
                    double px = norm_to_pixel(s.x, width);
                    double py = norm_to_pixel(s.y, height);
                    const double rx = std::nearbyint(px);
                    if (std::abs(px - rx) <= 1e-9) px = rx;
                    const double ry = std::nearbyint(py);
                    if (std::abs(py - ry) <= 1e-9) py = ry;
                    int x0i = static_cast<int>(std::floor(px));
                    int y0i = static_cast<int>(std::floor(py));
                    x0i = std::clamp(x0i, 0, std::max(width - 2, 0));
                    y0i = std::clamp(y0i, 0, std::max(height - 2, 0));
                    const int x1i = std::min(x0i + 1, width - 1);
                    const int y1i = std::min(y0i + 1, height - 1);
                    const double fx = px - x0i;
                    const double fy = py - y0i;
                    const double w00 = (1.0 - fx) * (1.0 - fy);
                    const double w10 = fx * (1.0 - fy);
                    const double w01 = (1.0 - fx) * fy;
                    const double w11 = fx * fy;
                    for (int ch = 0; ch < chans; ++ch) {
                        sampled.data[i * chans + ch] =
                            w00 * x0->at(x0i, y0i, ch) + w10 * x0->at(x1i, y0i, ch) +
                            w01 * x0->at(x0i, y1i, ch) + w11 * x0->at(x1i, y1i, ch);
                    }
                    if (m0_all_ones) {
                        valid.data[i] = 1;
                    } else {
                        const double mv = w00 * m0_values.at(x0i, y0i) +
                                          w10 * m0_values.at(x1i, y0i) +
                                          w01 * m0_values.at(x0i, y1i) +
                                          w11 * m0_values.at(x1i, y1i);
                        valid.data[i] = mv >= 0.5 ? 1 : 0;
                    }
                }
            }
        };
        if (static_cast<std::size_t>(width) * height >= 32768) {
            parallel_rows(height, rows);
        } else {
            rows(0, height);
        }
    }

    // Single-stage loss functional at the candidate grid. j < 0 evaluates
    // the current coordinates as-is.
    double eval(const ControlGrid &grid, int j, int axis, double delta,
                StageLoss *out) {
        resample(j, axis, delta);
        StageLoss comp;
        if (ref) {
            comp.appearance = appearance_loss(sampled, *ref, valid);
            comp.gradient = gradient_loss(sampled, *ref, valid);
        }
        if (ls) {
            comp.boundary = boundary_loss(perimeter_points(grid), *ls);
        }
        comp.mesh = line_penalty(grid) + shape_penalty(grid, c0);
        if (out) *out = comp;
        if (!boundary_changing) return comp.appearance;
        return comp.appearance + w->alpha1 * comp.boundary + w->alpha2 * comp.mesh +
               w->alpha3 * comp.gradient;
    }

    // Commits an accepted displacement into the cached coordinates.
    void apply(int j, int axis, double delta) {
        for (std::size_t i = 0; i < coords.size(); ++i) {
            const double shift = delta * psi[i * n + j];
            if (axis == 0) coords[i].x += shift; else coords[i].y += shift;
        }
    }
};

int run_stage(FitWorkspace &ws, const FitConfig &cfg, ControlGrid &current,
              double &current_loss, StageLoss &current_comp,
              std::vector<double> &trace) {
    double step = cfg.initial_step;
    int sweeps = 0;
    for (int it = 0; it < cfg.max_iters; ++it) {
        const double sweep_start = current_loss;
        bool accepted_any = false;
        for (int j = 0; j < ws.n; ++j) {
            for (int axis = 0; axis < 2; ++axis) {
                for (const double sign : {1.0, -1.0}) {
                    const double delta = sign * step;
                    ControlGrid cand = current;
                    double &coord = axis == 0 ? cand.points[static_cast<std::size_t>(j)].x
                                              : cand.points[static_cast<std::size_t>(j)].y;
                    coord += delta;
                    if (!fold_free(cand)) continue;
                    StageLoss comp;
                    const double loss = ws.eval(cand, j, axis, delta, &comp);
                    if (loss < current_loss) {
                        current = std::move(cand);
                        ws.apply(j, axis, delta);
                        current_loss = loss;
                        current_comp = comp;
                        trace.push_back(loss);
                        accepted_any = true;
                        break; // next axis / control point
                    }
                }
            }
        }
        ++sweeps;
        if (!accepted_any) {
            step *= 0.5;
            if (step < 1e-6) break;
        } else if (sweep_start - current_loss < cfg.tolerance) {
            break;
        }
    }
    return sweeps;
}

} // namespace

FitResult fit_rectification(const Image &x0, const Mask &m0, const Image *reference,
                            const LevelSet *ls, const LossWeights &w,
                            const FitConfig &cfg, const ControlGrid *warm_start) {
    cfg.validate();
    w.validate();
    if (m0.width != x0.width || m0.height != x0.height) {
        throw std::invalid_argument("fit_rectification: image/mask dimensions differ");
    }
    if (reference && !reference->same_shape(x0)) {
        throw std::invalid_argument("fit_rectification: reference shape differs");
    }
    if (!reference && !ls) {
        throw std::invalid_argument(
            "fit_rectification: need a reference or a level set to drive the fit");
    }

    FitWorkspace ws;
    ws.x0 = &x0;
    ws.ref = reference;
    ws.ls = ls;
    ws.w = &w;
    ws.boundary_changing = ls != nullptr;
    ws.W = x0.width;
    ws.H = x0.height;
    ws.C = x0.channels;
    ws.c0 = ControlGrid::basic(cfg.grid_cols, cfg.grid_rows);
    ws.n = ws.c0.count();
    ws.m0_all_ones = m0.all_ones();
    if (!ws.m0_all_ones) {
        ws.m0_values = Image(ws.W, ws.H, 1, 0.0);
        for (std::size_t i = 0; i < m0.data.size(); ++i) {
            ws.m0_values.data[i] = m0.data[i] ? 1.0 : 0.0;
        }
    }
    ws.sampled = Image(ws.W, ws.H, ws.C, 0.0);
    ws.valid = Mask(ws.W, ws.H, 0);

    const std::size_t N = static_cast<std::size_t>(ws.W) * ws.H;
    std::vector<Point2> dest(N);
    for (int y = 0; y < ws.H; ++y) {
        for (int x = 0; x < ws.W; ++x) {
            dest[static_cast<std::size_t>(y) * ws.W + x] = {pixel_to_norm(x, ws.W),
                                                            pixel_to_norm(y, ws.H)};
        }
    }
    ws.psi = tps_influence_matrix(ws.c0, dest, cfg.lambda);

    ControlGrid current = ws.c0;
    if (warm_start) {
        if (warm_start->count() != ws.c0.count()) {
            throw std::invalid_argument("fit_rectification: warm start shape differs");
        }
        current = *warm_start;
    }

    // Initialize the cached per-pixel coordinates from the start grid.
    ws.coords.assign(N, Point2{0.0, 0.0});
    for (std::size_t i = 0; i < N; ++i) {
        const double *row = ws.psi.data() + i * ws.n;
        double cx = 0.0, cy = 0.0;
        for (int j = 0; j < ws.n; ++j) {
            cx += row[j] * current.points[static_cast<std::size_t>(j)].x;
            cy += row[j] * current.points[static_cast<std::size_t>(j)].y;
        }
        ws.coords[i] = {cx, cy};
    }

    FitResult res;
    StageLoss comp;
    double loss = ws.eval(current, -1, 0, 0.0, &comp);
    if (!std::isfinite(loss)) {
        throw std::invalid_argument("fit_rectification: non-finite loss at initialization");
    }

    res.loss_trace[0].push_back(loss);
    res.iterations[0] = run_stage(ws, cfg, current, loss, comp, res.loss_trace[0]);
    res.c1 = current;
    const StageLoss comp1 = comp;

    res.loss_trace[1].push_back(loss);
    res.iterations[1] = run_stage(ws, cfg, current, loss, comp, res.loss_trace[1]);
    res.c2 = current;

    res.report = make_report({comp1, comp}, w, ws.boundary_changing);
    return res;
}

} // namespace rectiwarp
