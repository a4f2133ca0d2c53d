#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>

#include "rectiwarp/errors.hpp"
#include "rectiwarp/rng.hpp"
#include "rectiwarp/tps.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace rectiwarp;

namespace {

ControlGrid perturbed_grid(int cols, int rows, Rng &rng, double mag) {
    ControlGrid g = ControlGrid::basic(cols, rows);
    std::vector<Point2> offsets(g.points.size());
    for (Point2 &o : offsets) o = {rng.uniform(-mag, mag), rng.uniform(-mag, mag)};
    return g.displaced(offsets);
}

} // namespace

TEST_CASE("kernel values") {
    CHECK(tps_kernel(0.0) == 0.0);
    CHECK(tps_kernel(1.0) == 0.0);
    // 4 ln 2, frozen from scalar arithmetic
    CHECK(tps_kernel(2.0) == doctest::Approx(2.7725887222397811).epsilon(1e-15));
    CHECK(tps_kernel(std::exp(1.0)) ==
          doctest::Approx(std::exp(2.0)).epsilon(1e-14));
}

TEST_CASE("basic grid covers the square exactly") {
    const ControlGrid g = ControlGrid::basic(12, 10);
    CHECK(g.cols == 12);
    CHECK(g.rows == 10);
    CHECK(g.count() == 120);
    CHECK(g.at(0, 0).x == -1.0);
    CHECK(g.at(0, 0).y == -1.0);
    CHECK(g.at(11, 9).x == 1.0);
    CHECK(g.at(11, 9).y == 1.0);
    CHECK(g.at(11, 0).x == 1.0);
    CHECK(g.at(11, 0).y == -1.0);
}

TEST_CASE("solve interpolates the targets exactly at lambda 0") {
    Rng rng(7);
    const ControlGrid src = ControlGrid::basic(6, 5);
    const ControlGrid dst = perturbed_grid(6, 5, rng, 0.1);
    const TpsTransform t = solve_tps(src, dst);
    for (int i = 0; i < src.count(); ++i) {
        const Point2 got = tps_evaluate(t, src.points[static_cast<std::size_t>(i)]);
        const Point2 want = dst.points[static_cast<std::size_t>(i)];
        CHECK(std::abs(got.x - want.x) <= 1e-9);
        CHECK(std::abs(got.y - want.y) <= 1e-9);
    }
}

TEST_CASE("solution matches the dense Gaussian-elimination oracle") {
    Rng rng(13);
    const ControlGrid src = ControlGrid::basic(5, 4);
    const ControlGrid dst = perturbed_grid(5, 4, rng, 0.08);
    const TpsTransform lib = solve_tps(src, dst);
    const oracle::TpsSolution ref = oracle::tps_solve(src.points, dst.points);
    for (int i = 0; i < 40; ++i) {
        const Point2 q{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const Point2 a = tps_evaluate(lib, q);
        const Point2 b = oracle::tps_eval(ref, src.points, q);
        CHECK(std::abs(a.x - b.x) <= 1e-9);
        CHECK(std::abs(a.y - b.y) <= 1e-9);
    }
}

TEST_CASE("frozen four-point solution value") {
    const std::vector<Point2> src{{-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
    const std::vector<Point2> dst{{-0.9, -1.05}, {1.1, -0.95}, {-1.02, 0.9}, {0.95, 1.08}};
    const TpsTransform t =
        solve_tps(ControlGrid(2, 2, src), ControlGrid(2, 2, dst));
    const Point2 got = tps_evaluate(t, {0.3, 0.4});
    // oracle::tps_solve via dense LU, frozen
    CHECK(got.x == doctest::Approx(0.3020048290680386).epsilon(1e-12));
    CHECK(got.y == doctest::Approx(0.41732045581856392).epsilon(1e-12));
}

TEST_CASE("affine targets produce a pure affine transform") {
    const ControlGrid src = ControlGrid::basic(7, 6);
    ControlGrid dst = src;
    const double A[6] = {1.2, 0.1, 0.03, -0.05, 0.9, -0.07};
    for (Point2 &p : dst.points) {
        p = {A[0] * p.x + A[1] * p.y + A[2], A[3] * p.x + A[4] * p.y + A[5]};
    }
    const TpsTransform t = solve_tps(src, dst);
    double wnorm = 0.0;
    for (const Point2 &w : t.kernel_weights) wnorm += w.squared_norm();
    CHECK(std::sqrt(wnorm) <= 1e-8);
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const Point2 q{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const Point2 got = tps_evaluate(t, q);
        CHECK(std::abs(got.x - (A[0] * q.x + A[1] * q.y + A[2])) <= 1e-8);
        CHECK(std::abs(got.y - (A[3] * q.x + A[4] * q.y + A[5])) <= 1e-8);
    }
}

TEST_CASE("degenerate source sets are rejected") {
    // Duplicate sources make the kernel system singular.
    const std::vector<Point2> src{{-1, -1}, {-1, -1}, {0, 0}, {1, 1}};
    const std::vector<Point2> dst{{-1, -1}, {-0.9, -1}, {0, 0}, {1, 1}};
    CHECK_THROWS_AS((void)solve_tps(ControlGrid(4, 1, src), ControlGrid(4, 1, dst)),
                    DegenerateError);
}

TEST_CASE("regularization trades interpolation for smoothness") {
    Rng rng(17);
    const ControlGrid src = ControlGrid::basic(6, 5);
    const ControlGrid dst = perturbed_grid(6, 5, rng, 0.1);
    const TpsTransform exact = solve_tps(src, dst, 0.0);
    const TpsTransform smooth = solve_tps(src, dst, 0.1);
    double exact_norm = 0.0, smooth_norm = 0.0, resid = 0.0;
    for (const Point2 &w : exact.kernel_weights) exact_norm += w.squared_norm();
    for (const Point2 &w : smooth.kernel_weights) smooth_norm += w.squared_norm();
    for (int i = 0; i < src.count(); ++i) {
        const Point2 got = tps_evaluate(smooth, src.points[static_cast<std::size_t>(i)]);
        resid = std::max(resid, (got - dst.points[static_cast<std::size_t>(i)]).norm());
    }
    CHECK(smooth_norm < exact_norm); // bending energy damped
    CHECK(resid > 1e-9); // no longer interpolating
    CHECK(resid < 0.2); // but still close
}

TEST_CASE("influence matrix reproduces the solve-then-evaluate path") {
    Rng rng(29);
    const ControlGrid src = ControlGrid::basic(5, 4);
    const ControlGrid dst = perturbed_grid(5, 4, rng, 0.09);
    std::vector<Point2> samples;
    for (int i = 0; i < 64; ++i) {
        samples.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
    }
    const std::vector<double> psi = tps_influence_matrix(src, samples);
    REQUIRE(psi.size() == samples.size() * static_cast<std::size_t>(src.count()));
    const TpsTransform t = solve_tps(src, dst);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double wx = 0.0, wy = 0.0;
        for (int j = 0; j < src.count(); ++j) {
            wx += psi[i * src.count() + j] * dst.points[static_cast<std::size_t>(j)].x;
            wy += psi[i * src.count() + j] * dst.points[static_cast<std::size_t>(j)].y;
        }
        const Point2 direct = tps_evaluate(t, samples[i]);
        CHECK(std::abs(wx - direct.x) <= 1e-9);
        CHECK(std::abs(wy - direct.y) <= 1e-9);
    }
}

TEST_CASE("generate_grid equals per-pixel evaluation") {
    Rng rng(37);
    const ControlGrid src = ControlGrid::basic(4, 4);
    const ControlGrid dst = perturbed_grid(4, 4, rng, 0.07);
    const TpsTransform t = solve_tps(src, dst);
    const SamplingGrid grid = generate_grid(t, 19, 13);
    for (int y = 0; y < 13; ++y) {
        for (int x = 0; x < 19; ++x) {
            const Point2 direct =
                tps_evaluate(t, {pixel_to_norm(x, 19), pixel_to_norm(y, 13)});
            CHECK(grid.at(x, y).x == direct.x);
            CHECK(grid.at(x, y).y == direct.y);
        }
    }
}

TEST_CASE("identity sampling grid copies the image bit for bit") {
    Rng rng(41);
    const Image img = testsup::random_image(33, 27, 3, rng);
    SamplingGrid grid(33, 27);
    for (int y = 0; y < 27; ++y) {
        for (int x = 0; x < 33; ++x) {
            grid.at(x, y) = {pixel_to_norm(x, 33), pixel_to_norm(y, 27)};
        }
    }
    const SampleResult s = bilinear_sample(img, grid);
    CHECK(std::memcmp(s.image.data.data(), img.data.data(),
                      img.data.size() * sizeof(double)) == 0);
    CHECK(s.mask.all_ones());
}

TEST_CASE("bilinear interpolation against direct evaluation") {
    Rng rng(43);
    const Image img = testsup::random_image(16, 14, 1, rng);
    SamplingGrid grid(5, 5);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 5; ++x) {
            grid.at(x, y) = {rng.uniform(-0.95, 0.95), rng.uniform(-0.95, 0.95)};
        }
    }
    const SampleResult s = bilinear_sample(img, grid);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 5; ++x) {
            const Point2 c = grid.at(x, y);
            const double px = norm_to_pixel(c.x, 16);
            const double py = norm_to_pixel(c.y, 14);
            const int x0 = static_cast<int>(std::floor(px));
            const int y0 = static_cast<int>(std::floor(py));
            const double fx = px - x0;
            const double fy = py - y0;
            const double want = (1 - fx) * (1 - fy) * img.at(x0, y0, 0) +
                                fx * (1 - fy) * img.at(x0 + 1, y0, 0) +
                                (1 - fx) * fy * img.at(x0, y0 + 1, 0) +
                                fx * fy * img.at(x0 + 1, y0 + 1, 0);
            CHECK(s.image.at(x, y, 0) == doctest::Approx(want).epsilon(1e-12));
            CHECK(s.mask.at(x, y) == 1);
        }
    }
}

TEST_CASE("out-of-range coordinates are masked out with value zero") {
    const Image img = testsup::checkerboard(8, 8, 2);
    SamplingGrid grid(3, 1);
    grid.at(0, 0) = {-1.2, 0.0};
    grid.at(1, 0) = {0.0, 1.0001};
    grid.at(2, 0) = {0.5, 0.5};
    const SampleResult s = bilinear_sample(img, grid);
    CHECK(s.image.at(0, 0, 0) == 0.0);
    CHECK(s.mask.at(0, 0) == 0);
    CHECK(s.image.at(1, 0, 0) == 0.0);
    CHECK(s.mask.at(1, 0) == 0);
    CHECK(s.mask.at(2, 0) == 1);
}

TEST_CASE("midpoint sample of a two-pixel image") {
    Image img(2, 1, 1);
    img.at(0, 0, 0) = 0.25;
    img.at(1, 0, 0) = 0.75;
    SamplingGrid grid(1, 1);
    grid.at(0, 0) = {0.0, -1.0}; // halfway between the two pixels
    const SampleResult s = bilinear_sample(img, grid);
    CHECK(s.image.at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("mask warp thresholds at half occupancy") {
    Mask m(8, 8, 1);
    for (int y = 0; y < 8; ++y) {
        for (int x = 4; x < 8; ++x) m.at(x, y) = 0; // right half invalid
    }
    SamplingGrid grid(3, 1);
    grid.at(0, 0) = {pixel_to_norm(1, 8), pixel_to_norm(4, 8)}; // deep in valid half
    grid.at(1, 0) = {pixel_to_norm(6, 8), pixel_to_norm(4, 8)}; // deep in invalid half
    grid.at(2, 0) = {-2.0, 0.0}; // out of range entirely
    const Mask w = warp_mask(m, grid);
    CHECK(w.at(0, 0) == 1);
    CHECK(w.at(1, 0) == 0);
    CHECK(w.at(2, 0) == 0);
}

TEST_CASE("zero deltas keep the input bit for bit") {
    Rng rng(53);
    const Image img = testsup::random_image(24, 20, 1, rng);
    const Mask m0(24, 20, 1);
    const ControlGrid c0 = ControlGrid::basic(6, 5);
    const std::vector<Point2> zero(static_cast<std::size_t>(c0.count()), Point2{0, 0});
    const RpTpsResult rp = rp_tps_apply(img, m0, c0, zero, zero);
    CHECK(std::memcmp(rp.x1.data.data(), img.data.data(),
                      img.data.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(rp.xd.data.data(), img.data.data(),
                      img.data.size() * sizeof(double)) == 0);
    CHECK(rp.m1.all_ones());
    CHECK(rp.md.all_ones());
}

TEST_CASE("the final warp samples only the foremost input") {
    Rng rng(59);
    const Image img = testsup::random_image(32, 32, 1, rng);
    const Mask m0(32, 32, 1);
    const ControlGrid c0 = ControlGrid::basic(5, 5);
    std::vector<Point2> d1(static_cast<std::size_t>(c0.count()));
    std::vector<Point2> d2(static_cast<std::size_t>(c0.count()));
    for (Point2 &d : d1) d = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
    for (Point2 &d : d2) d = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
    const RpTpsResult rp = rp_tps_apply(img, m0, c0, d1, d2);

    // c2 is exactly (c0 + d1) + d2, summed in that order.
    ControlGrid expect = c0;
    for (std::size_t i = 0; i < expect.points.size(); ++i) {
        expect.points[i] += d1[i];
        expect.points[i] += d2[i];
    }
    for (std::size_t i = 0; i < expect.points.size(); ++i) {
        CHECK(rp.c2.points[i].x == expect.points[i].x);
        CHECK(rp.c2.points[i].y == expect.points[i].y);
    }

    // One-shot warp from the same targets is bit-identical to x_D.
    const TpsTransform t = solve_tps(c0, rp.c2);
    const SamplingGrid grid = generate_grid(t, img.width, img.height);
    const SampleResult one_shot = bilinear_sample(img, grid);
    CHECK(std::memcmp(one_shot.image.data.data(), rp.xd.data.data(),
                      img.data.size() * sizeof(double)) == 0);
    CHECK(one_shot.mask.data == rp.md.data);
}

TEST_CASE("control grid JSON round trip") {
    Rng rng(61);
    const ControlGrid g = perturbed_grid(4, 3, rng, 0.1);
    nlohmann::json j;
    to_json(j, g);
    const auto back = j.get<ControlGrid>();
    CHECK(back.cols == g.cols);
    CHECK(back.rows == g.rows);
    for (std::size_t i = 0; i < g.points.size(); ++i) {
        CHECK(back.points[i].x == g.points[i].x);
        CHECK(back.points[i].y == g.points[i].y);
    }
}

TEST_CASE("displaced length mismatch throws") {
    const ControlGrid g = ControlGrid::basic(3, 3);
    CHECK_THROWS_AS((void)g.displaced(std::vector<Point2>(4)), std::invalid_argument);
}
