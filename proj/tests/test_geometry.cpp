#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "rectiwarp/errors.hpp"
#include "rectiwarp/geometry.hpp"
#include "rectiwarp/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace rectiwarp;

namespace {

Point2 random_disk_point(Rng &rng) {
    for (;;) {
        const Point2 p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        if (p.squared_norm() <= 1.0) return p;
    }
}

DistortionParams random_params(Rng &rng) {
    DistortionParams p;
    p.order = 3;
    p.theta_coeffs = {rng.uniform(0.4, 0.7), rng.uniform(-0.05, 0.05),
                      rng.uniform(-0.01, 0.01)};
    p.radial_coeffs = {rng.uniform(0.4, 0.7), rng.uniform(-0.05, 0.05),
                       rng.uniform(-0.01, 0.01)};
    p.alpha = rng.uniform(-0.3, 0.3);
    p.t0 = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    return p;
}

} // namespace

TEST_CASE("identity parameters give the identity map") {
    const DistortionParams id = DistortionParams::identity();
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const Point2 p = random_disk_point(rng);
        const Point2 d = distort_general(p, id);
        CHECK(d.x == doctest::Approx(p.x).epsilon(1e-15));
        CHECK(d.y == doctest::Approx(p.y).epsilon(1e-15));
    }
}

TEST_CASE("origin maps to the decentering offset") {
    DistortionParams p = DistortionParams::identity(2);
    p.t0 = {0.034, -0.012};
    const Point2 d = distort_general({0.0, 0.0}, p);
    CHECK(d.x == 0.034);
    CHECK(d.y == -0.012);
}

TEST_CASE("small-radius limit scale is k1 + k'1") {
    DistortionParams p = DistortionParams::identity(2);
    p.theta_coeffs = {0.9, 0.0};
    p.radial_coeffs = {0.1, 0.0};
    // atan(r)/r -> 1, so the combined scale tends to k1 + k'1 = 1.0.
    const double eps = 1e-7;
    const Point2 d = distort_general({eps, 0.0}, p);
    CHECK(d.x == doctest::Approx(eps).epsilon(1e-9));
    CHECK(d.y == 0.0);
}

TEST_CASE("general model matches the independent direct evaluation") {
    Rng rng(23);
    for (int i = 0; i < 100; ++i) {
        const DistortionParams p = random_params(rng);
        const Point2 q = random_disk_point(rng);
        const Point2 lib = distort_general(q, p);
        const Point2 ref = oracle::distort(q, p.theta_coeffs, p.radial_coeffs,
                                           p.alpha, p.t0);
        CHECK(std::abs(lib.x - ref.x) <= 1e-12);
        CHECK(std::abs(lib.y - ref.y) <= 1e-12);
    }
}

TEST_CASE("frozen general-model value") {
    DistortionParams p;
    p.order = 2;
    p.theta_coeffs = {1.05, 0.03};
    p.radial_coeffs = {0.02, -0.01};
    p.alpha = 0.1;
    p.t0 = {0.01, -0.02};
    const Point2 d = distort_general({0.3, -0.2}, p);
    // oracle::distort, frozen
    CHECK(d.x == doctest::Approx(0.3379893205610402).epsilon(1e-13));
    CHECK(d.y == doctest::Approx(-0.19410500068021416).epsilon(1e-13));
}

TEST_CASE("reductions agree with the general model") {
    Rng rng(31);
    for (int i = 0; i < 200; ++i) {
        const Point2 q = random_disk_point(rng);

        DistortionParams p = DistortionParams::identity(2);
        p.radial_coeffs = {0.0, 0.0};
        p.theta_coeffs = {rng.uniform(0.9, 1.1), rng.uniform(-0.05, 0.05)};
        const Point2 kan = distort_kannala(q, p.theta_coeffs);
        const Point2 gen_kan = distort_general(q, p);
        CHECK(std::abs(kan.x - gen_kan.x) <= 1e-12);
        CHECK(std::abs(kan.y - gen_kan.y) <= 1e-12);

        DistortionParams b = DistortionParams::identity(2);
        b.radial_coeffs = {rng.uniform(0.95, 1.1), rng.uniform(-0.1, 0.1)};
        const Point2 brown = distort_brown(q, b.radial_coeffs);
        const Point2 gen_brown = distort_general(q, b);
        CHECK(std::abs(brown.x - gen_brown.x) <= 1e-12);
        CHECK(std::abs(brown.y - gen_brown.y) <= 1e-12);

        DistortionParams st = b;
        st.t0 = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
        const Point2 stitched = distort_stitched(q, st.radial_coeffs, st.t0);
        const Point2 gen_st = distort_general(q, st);
        CHECK(std::abs(stitched.x - gen_st.x) <= 1e-12);
        CHECK(std::abs(stitched.y - gen_st.y) <= 1e-12);

        DistortionParams rot = b;
        rot.alpha = rng.uniform(-0.2, 0.2);
        const Point2 rotated = distort_rotation(q, rot.radial_coeffs, rot.alpha);
        const Point2 gen_rot = distort_general(q, rot);
        CHECK(std::abs(rotated.x - gen_rot.x) <= 1e-12);
        CHECK(std::abs(rotated.y - gen_rot.y) <= 1e-12);
    }
}

TEST_CASE("undistort inverts distort across all task families") {
    Rng rng(47);
    for (int i = 0; i < 100; ++i) {
        const Task task = static_cast<Task>(static_cast<int>(rng.below(4)));
        const DistortionParams p = sample_task_params(task, rng);
        const Point2 q = random_disk_point(rng) * 0.9;
        const Point2 d = distort_general(q, p);
        const Point2 back = undistort_point(d, p);
        CHECK(std::abs(back.x - q.x) <= 5e-9);
        CHECK(std::abs(back.y - q.y) <= 5e-9);
    }
}

TEST_CASE("undistort of the offset itself returns the origin") {
    DistortionParams p = DistortionParams::identity(2);
    p.t0 = {0.05, -0.07};
    const Point2 back = undistort_point({0.05, -0.07}, p);
    CHECK(back.x == 0.0);
    CHECK(back.y == 0.0);
}

TEST_CASE("undistort rejects an unreachable radius") {
    DistortionParams p = DistortionParams::identity(2);
    p.radial_coeffs = {1.0, -5.0}; // radial map peaks near 0.17 and collapses
    CHECK_THROWS_AS((void)undistort_point({0.9, 0.0}, p), NoConvergenceError);
}

TEST_CASE("undistort rejects a non-monotone radial map") {
    DistortionParams p = DistortionParams::identity(3);
    p.radial_coeffs = {1.0, -1.0, 0.3}; // derivative dips negative mid-range
    CHECK_THROWS_AS((void)undistort_point({1.5, 0.0}, p), NoConvergenceError);
}

TEST_CASE("pixel frame mapping") {
    const PixelFrame f = PixelFrame::standard(64, 48);
    CHECK(f.focal == 24.0);
    CHECK(f.cx == 31.5);
    CHECK(f.cy == 23.5);
    const Point2 p = f.to_normalized(31.5, 23.5);
    CHECK(p.x == 0.0);
    CHECK(p.y == 0.0);
    const Point2 back = f.to_pixel(f.to_normalized(7.0, 9.0));
    CHECK(back.x == doctest::Approx(7.0).epsilon(1e-14));
    CHECK(back.y == doctest::Approx(9.0).epsilon(1e-14));
}

TEST_CASE("normalized coordinate helpers span [-1,1]") {
    CHECK(pixel_to_norm(0, 64) == -1.0);
    CHECK(pixel_to_norm(63, 64) == 1.0);
    CHECK(norm_to_pixel(-1.0, 64) == 0.0);
    CHECK(norm_to_pixel(1.0, 64) == 63.0);
    CHECK(norm_to_pixel(pixel_to_norm(17, 64), 64) == doctest::Approx(17.0).epsilon(1e-14));
}

TEST_CASE("distortion flow matches per-pixel composition") {
    Rng rng(61);
    const DistortionParams p = sample_task_params(Task::T3, rng);
    const int W = 23, H = 17;
    const PixelFrame f = PixelFrame::standard(W, H);
    const FlowField flow = distortion_flow(p, W, H);
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            const Point2 n = f.to_normalized(u, v);
            const Point2 ref = oracle::distort(n, p.theta_coeffs, p.radial_coeffs,
                                               p.alpha, p.t0);
            const Point2 spx = f.to_pixel(ref);
            CHECK(std::abs(flow.at(u, v).x - (spx.x - u)) <= 1e-12);
            CHECK(std::abs(flow.at(u, v).y - (spx.y - v)) <= 1e-12);
        }
    }
}

TEST_CASE("identity distortion flow is numerically zero") {
    const FlowField flow = distortion_flow(DistortionParams::identity(), 31, 29);
    for (const Point2 &vec : flow.vectors) {
        CHECK(std::abs(vec.x) <= 1e-9);
        CHECK(std::abs(vec.y) <= 1e-9);
    }
}

TEST_CASE("parameter JSON round trip and validation") {
    DistortionParams p;
    p.order = 2;
    p.theta_coeffs = {1.01, -0.02};
    p.radial_coeffs = {0.0, 0.0};
    p.alpha = 0.05;
    p.t0 = {0.01, 0.02};
    nlohmann::json j;
    to_json(j, p);
    const auto q = j.get<DistortionParams>();
    CHECK(q.theta_coeffs == p.theta_coeffs);
    CHECK(q.radial_coeffs == p.radial_coeffs);
    CHECK(q.alpha == p.alpha);
    CHECK(q.t0.x == p.t0.x);
    CHECK(q.t0.y == p.t0.y);
    CHECK(q.order == p.order);

    nlohmann::json bad = j;
    bad["surprise"] = 1;
    CHECK_THROWS_AS((void)bad.get<DistortionParams>(), std::invalid_argument);

    nlohmann::json missing = j;
    missing.erase("alpha");
    CHECK_THROWS_AS((void)missing.get<DistortionParams>(), std::invalid_argument);

    nlohmann::json shortt0 = j;
    shortt0["t0"] = {0.1};
    CHECK_THROWS_AS((void)shortt0.get<DistortionParams>(), std::invalid_argument);

    DistortionParams mismatched;
    mismatched.order = 3;
    mismatched.theta_coeffs = {1.0};
    mismatched.radial_coeffs = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(mismatched.validate(), std::invalid_argument);
}

TEST_CASE("task parameter sampling stays in the declared ranges") {
    Rng rng(5);
    double t1_k1_min = 1e9, t1_k1_max = -1e9;
    for (int i = 0; i < 1000; ++i) {
        const DistortionParams p1 = sample_task_params(Task::T1, rng);
        CHECK(p1.theta_coeffs[0] >= 0.9);
        CHECK(p1.theta_coeffs[0] <= 1.1);
        CHECK(p1.theta_coeffs[1] >= -0.05);
        CHECK(p1.theta_coeffs[1] <= 0.05);
        CHECK(p1.radial_coeffs[0] == 0.0);
        CHECK(p1.alpha == 0.0);
        t1_k1_min = std::min(t1_k1_min, p1.theta_coeffs[0]);
        t1_k1_max = std::max(t1_k1_max, p1.theta_coeffs[0]);

        const DistortionParams p2 = sample_task_params(Task::T2, rng);
        CHECK(p2.radial_coeffs[0] >= 0.95);
        CHECK(p2.radial_coeffs[0] <= 1.1);
        CHECK(p2.radial_coeffs[1] >= -0.1);
        CHECK(p2.radial_coeffs[1] <= 0.1);
        CHECK(p2.theta_coeffs[0] == 0.0);
        CHECK(p2.t0.x == 0.0);

        const DistortionParams p3 = sample_task_params(Task::T3, rng);
        CHECK(std::abs(p3.t0.x) <= 0.1);
        CHECK(std::abs(p3.t0.y) <= 0.1);

        const DistortionParams p4 = sample_task_params(Task::T4, rng);
        CHECK(std::abs(p4.alpha) <= 10.0 * 3.14159265358979 / 180.0 + 1e-12);
        CHECK(p4.radial_coeffs[0] == 1.0);
    }
    // Coarse uniformity evidence: 1000 draws cover the range ends.
    CHECK(t1_k1_min < 0.94);
    CHECK(t1_k1_max > 1.06);
}

TEST_CASE("task sampling is deterministic in the seed") {
    Rng a(99), b(99);
    for (int i = 0; i < 20; ++i) {
        const DistortionParams pa = sample_task_params(Task::T3, a);
        const DistortionParams pb = sample_task_params(Task::T3, b);
        CHECK(pa.radial_coeffs == pb.radial_coeffs);
        CHECK(pa.t0.x == pb.t0.x);
        CHECK(pa.t0.y == pb.t0.y);
    }
}

TEST_CASE("task names round trip") {
    for (const Task t : {Task::T1, Task::T2, Task::T3, Task::T4}) {
        CHECK(task_from_string(task_name(t)) == t);
    }
    CHECK_THROWS_AS((void)task_from_string("t9"), std::invalid_argument);
}
