#pragma once

#include <array>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rectiwarp/image.hpp"
#include "rectiwarp/level_set.hpp"
#include "rectiwarp/tps.hpp"

namespace rectiwarp {

// Stage decay and per-term weights of the combined deformation loss:
//   sum_{j=0,1} gamma^j (L_a^j + alpha1*L_b^j + alpha2*L_p^j + alpha3*L_g^j)
struct LossWeights {
    double gamma = 0.9;
    double alpha1 = 1e-2; // boundary term
    double alpha2 = 1.0; // line/shape mesh term
    double alpha3 = 1e-2; // gradient term

    void validate() const; // all non-negative, finite
};

// Raw (unweighted) loss components of one stage.
struct StageLoss {
    double appearance = 0.0; // L_a
    double boundary = 0.0; // L_b
    double mesh = 0.0; // L_p (line + shape)
    double gradient = 0.0; // L_g
};

struct LossReport {
    std::array<StageLoss, 2> stages{};
    bool boundary_changing = true;
    double total = 0.0;
};

void to_json(nlohmann::json &j, const LossReport &r);

// Perimeter ring of a control grid: the 2*(cols+rows)-4 outermost points,
// in row-major scan order.
std::vector<Point2> perimeter_points(const ControlGrid &grid);

// Mean asymmetric level-set penalty over the given (outermost) points.
double boundary_loss(const std::vector<Point2> &outer_points, const LevelSet &ls);

// Mean absolute difference over valid pixels, averaged across channels.
double appearance_loss(const Image &a, const Image &b, const Mask &valid);

// L1 distance between forward-difference gradients (x and y) of a and b,
// restricted to gradient entries whose two supporting pixels are both
// valid.
double gradient_loss(const Image &a, const Image &b, const Mask &valid);

// Mean over all interior collinear triples (along rows and columns) of
// 1 - cos(angle) between consecutive edge vectors. Zero for any affine
// image of a regular grid.
double line_penalty(const ControlGrid &grid);

// Mean over grid quads of the residual of the best-fit 4-parameter
// similarity from the reference quad to the deformed quad (RMS point
// residual divided by the reference quad's RMS scale). Zero iff every quad
// is an exact similarity image of its reference.
double shape_penalty(const ControlGrid &grid, const ControlGrid &reference);

// Combined two-stage total. When boundary_changing is false only the
// appearance terms contribute (tasks that keep the image border fixed).
double total_loss(const std::array<StageLoss, 2> &stages, const LossWeights &w,
                  bool boundary_changing);

LossReport make_report(const std::array<StageLoss, 2> &stages, const LossWeights &w,
                       bool boundary_changing);

} // namespace rectiwarp
