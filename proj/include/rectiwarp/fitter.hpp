#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rectiwarp/losses.hpp"
#include "rectiwarp/tps.hpp"

namespace rectiwarp {

// Configuration of the two-stage coordinate-descent fit.
struct FitConfig {
    int stages = 2; // fixed at 2
    int max_iters = 40; // sweeps per stage
    double initial_step = 0.05; // normalized units
    double tolerance = 1e-7; // stop when an accepted sweep improves less
    std::uint64_t seed = 0;
    int grid_cols = 12;
    int grid_rows = 10;
    double lambda = 0.0; // TPS regularization

    void validate() const;
};

void to_json(nlohmann::json &j, const FitConfig &c);
void from_json(const nlohmann::json &j, FitConfig &c);

struct FitResult {
    ControlGrid c1;
    ControlGrid c2;
    LossReport report; // components at (c1, c2) and the combined total
    // Accepted values of the single-stage loss functional, one trace per
    // stage; trace[0] starts at the initial grid, trace[1] starts at c1.
    std::array<std::vector<double>, 2> loss_trace;
    std::array<int, 2> iterations{};
};

void to_json(nlohmann::json &j, const FitResult &r);

// Least-squares control targets reproducing a dense backward flow: finds
// c2 minimizing the mean squared difference between the TPS-induced source
// coordinates (controls c0 -> c2) and the flow's source coordinates.
// Exact (<= 1e-6) when the flow was generated by a TPS of the same grid
// shape. Throws DegenerateError on a rank-deficient design.
ControlGrid fit_from_flow(const FlowField &flow, int cols, int rows,
                          double lambda = 0.0);

// Direct numerical optimization of the deformation objective. Stage 1
// descends the single-stage loss from c0 (or from warm_start when given);
// stage 2 continues from the frozen c1. Only strictly improving candidate
// moves are accepted, and any candidate whose induced mesh folds over is
// rejected, so the loss trace is monotone and stage-2 final <= stage-1
// final <= initial.
//
// reference == nullptr drops the appearance and gradient terms;
// ls == nullptr marks the task as boundary-preserving (only appearance
// terms contribute). At least one of the two must be present.
FitResult fit_rectification(const Image &x0, const Mask &m0, const Image *reference,
                            const LevelSet *ls, const LossWeights &w,
                            const FitConfig &cfg,
                            const ControlGrid *warm_start = nullptr);

// Central-difference gradient of an arbitrary scalar loss with respect to
// each control-point coordinate.
std::vector<Point2> finite_diff_gradient(
    const std::function<double(const ControlGrid &)> &loss_fn,
    const ControlGrid &grid, double eps);

// Analytic gradient of the mean-squared warp residual
//   L(c) = mean_i |warp_c(sample_i) - target_i|^2
// where warp_c is the TPS with fixed sources evaluated through the
// influence matrix. Verifiable against finite_diff_gradient.
std::vector<Point2> warp_residual_gradient(const ControlGrid &sources,
                                           const std::vector<Point2> &samples,
                                           const std::vector<Point2> &targets,
                                           const ControlGrid &candidate,
                                           double lambda = 0.0);

double warp_residual_loss(const ControlGrid &sources,
                          const std::vector<Point2> &samples,
                          const std::vector<Point2> &targets,
                          const ControlGrid &candidate, double lambda = 0.0);

// Mean-squared appearance loss through the full sampling chain:
//   L(c) = mean_{pixels,channels} (S[G(tps(c0->c)); x0] - ref)^2
// and its analytic chain-rule gradient (bilinear-sampler derivative times
// the influence of each control target on each pixel's source coordinate).
// The gradient is exact wherever no source coordinate sits on a pixel-cell
// edge; out-of-range pixels contribute value 0 and zero gradient.
double sampling_loss(const Image &x0, const Image &ref, const ControlGrid &c0,
                     const ControlGrid &candidate, double lambda = 0.0);

std::vector<Point2> sampling_loss_gradient(const Image &x0, const Image &ref,
                                           const ControlGrid &c0,
                                           const ControlGrid &candidate,
                                           double lambda = 0.0);

} // namespace rectiwarp
