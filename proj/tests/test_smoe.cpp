#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <nlohmann/json.hpp>
#include <vector>

#include "rectiwarp/rng.hpp"
#include "rectiwarp/smoe.hpp"

using namespace rectiwarp;

namespace {

std::vector<int> support(const GateWeights &g) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < g.weights.size(); ++i) {
        if (g.weights[i] != 0.0) idx.push_back(static_cast<int>(i));
    }
    return idx;
}

} // namespace

TEST_CASE("two kept scores follow the logistic split") {
    // Oracle: softmax over {2.0, 1.0} = (e/(1+e), 1/(1+e)) applied to the
    // top two of four scores.
    const GateWeights g = topk_softmax({2.0, 1.0, -3.0, 0.5}, 2);
    CHECK(g.weights[0] == doctest::Approx(0.7310585786300049).epsilon(1e-15));
    CHECK(g.weights[1] == doctest::Approx(0.2689414213699951).epsilon(1e-15));
    CHECK(g.weights[2] == 0.0);
    CHECK(g.weights[3] == 0.0);
    CHECK(g.k == 2);
    CHECK(g.argmax() == 0);
}

TEST_CASE("k equal to n with equal scores gives the uniform gate") {
    const GateWeights g = topk_softmax({0.7, 0.7, 0.7, 0.7, 0.7}, 5);
    for (double w : g.weights) CHECK(w == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("k=1 is a one-hot argmax") {
    const GateWeights g = topk_softmax({0.2, 3.1, 1.0, -0.5, 0.7}, 1);
    CHECK(g.weights == std::vector<double>{0.0, 1.0, 0.0, 0.0, 0.0});
    // Exactly 1.0 and exactly +0.0: bit-level one-hot.
    CHECK(!std::signbit(g.weights[0]));
    CHECK(g.argmax() == 1);
}

TEST_CASE("ties prefer the lowest index") {
    const GateWeights g = topk_softmax({1.5, 2.5, 2.5, 2.5}, 2);
    CHECK(support(g) == std::vector<int>{1, 2});
    CHECK(g.weights[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.weights[2] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.argmax() == 1);
}

TEST_CASE("weights always sum to one with at most k nonzero") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform(0.0, 8.0));
        const int k = 1 + static_cast<int>(rng.uniform(0.0, static_cast<double>(n)));
        std::vector<double> scores(n);
        for (double &s : scores) s = rng.uniform(-20.0, 20.0);
        const GateWeights g =
            topk_softmax(scores, std::min(k, n));
        double sum = 0.0;
        int nonzero = 0;
        for (double w : g.weights) {
            CHECK(w >= 0.0);
            sum += w;
            if (w != 0.0) ++nonzero;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        CHECK(nonzero <= std::min(k, n));
    }
}

TEST_CASE("extreme score gaps stay finite") {
    const GateWeights g = topk_softmax({1000.0, 999.0}, 2);
    CHECK(std::isfinite(g.weights[0]));
    CHECK(g.weights[0] == doctest::Approx(0.7310585786300049).epsilon(1e-15));
    CHECK(g.weights[0] + g.weights[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("support is invariant under strictly increasing transforms") {
    Rng rng(37);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scores(6);
        for (double &s : scores) s = rng.uniform(-3.0, 3.0);
        const int k = 1 + trial % 4;
        const std::vector<int> base = support(topk_softmax(scores, k));

        const double a = rng.uniform(0.5, 3.0);  // positive slope
        const double b = rng.uniform(-2.0, 2.0); // arbitrary shift
        std::vector<double> affine(6), monotone(6);
        for (int i = 0; i < 6; ++i) {
            affine[i] = a * scores[i] + b;
            monotone[i] = std::atan(scores[i]) + 0.1 * scores[i];
        }
        CHECK(support(topk_softmax(affine, k)) == base);
        CHECK(support(topk_softmax(monotone, k)) == base);
    }
}

TEST_CASE("gate argument validation") {
    CHECK_THROWS_AS((void)topk_softmax({1.0, 2.0}, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)topk_softmax({1.0, 2.0}, 3), std::invalid_argument);
    CHECK_THROWS_AS((void)topk_softmax({}, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)topk_softmax({1.0, std::nan("")}, 1), std::invalid_argument);
}

TEST_CASE("combining expert outputs") {
    const GateWeights g = topk_softmax({2.0, 1.0}, 2);
    const std::vector<std::vector<double>> outputs{{10.0, 0.0}, {20.0, 1.0}};
    const std::vector<double> mix = smoe_combine(g, outputs);
    // 0.731...*10 + 0.268...*20 elementwise.
    CHECK(mix[0] == doctest::Approx(12.689414213699951).epsilon(1e-15));
    CHECK(mix[1] == doctest::Approx(0.2689414213699951).epsilon(1e-15));

    CHECK_THROWS_AS((void)smoe_combine(g, std::vector<std::vector<double>>{{1.0}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        (void)smoe_combine(g, std::vector<std::vector<double>>{{1.0}, {2.0, 3.0}}),
        std::invalid_argument);
}

TEST_CASE("k=1 combination is bit-equal to the selected expert") {
    const GateWeights g = topk_softmax({0.1, 5.0, 4.9}, 1);
    const std::vector<double> winner{0.123456789, -0.0, 1e-300, 7.25};
    const std::vector<std::vector<double>> outputs{
        {1.0, 1.0, 1.0, 1.0}, winner, {2.0, 2.0, 2.0, 2.0}};
    const std::vector<double> mix = smoe_combine(g, outputs);
    REQUIRE(mix.size() == winner.size());
    CHECK(std::memcmp(mix.data(), winner.data(), winner.size() * sizeof(double)) == 0);
    CHECK(std::signbit(mix[1])); // even -0.0 survives verbatim
}

TEST_CASE("zero-weight experts are never invoked") {
    const GateWeights g = topk_softmax({3.0, -1.0, 2.0, 0.0}, 2);
    std::vector<int> calls(4, 0);
    std::vector<std::function<std::vector<double>()>> experts;
    for (int i = 0; i < 4; ++i) {
        experts.emplace_back([i, &calls]() {
            ++calls[i];
            return std::vector<double>{static_cast<double>(i)};
        });
    }
    (void)smoe_combine(g, experts);
    CHECK(calls == std::vector<int>{1, 0, 1, 0});
}

TEST_CASE("gate weights serialize") {
    const GateWeights g = topk_softmax({2.0, 1.0, 0.0}, 2);
    nlohmann::json j = g;
    CHECK(j.at("k").get<int>() == 2);
    CHECK(j.at("weights").size() == 3);
    CHECK(j.at("weights")[2].get<double>() == 0.0);
}
