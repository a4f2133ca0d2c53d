#include "rectiwarp/smoe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rectiwarp {

int GateWeights::argmax() const {
    if (weights.empty()) {
        throw std::invalid_argument("GateWeights::argmax: empty weights");
    }
    int best = 0;
    for (int i = 1; i < static_cast<int>(weights.size()); ++i) {
        if (weights[i] > weights[best]) best = i;
    }
    return best;
}

void to_json(nlohmann::json &j, const GateWeights &g) {
    j = nlohmann::json{{"weights", g.weights}, {"k", g.k}};
}

GateWeights topk_softmax(const std::vector<double> &scores, int k) {
    const int n = static_cast<int>(scores.size());
    if (k < 1 || k > n) {
        throw std::invalid_argument("topk_softmax: k out of range");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) {
            throw std::invalid_argument("topk_softmax: non-finite score");
        }
    }

    // Order by descending score, lowest index first on ties.
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    GateWeights g;
    g.k = k;
    g.weights.assign(static_cast<std::size_t>(n), 0.0);
    double max_kept = scores[idx[0]];
    double denom = 0.0;
    for (int i = 0; i < k; ++i) {
        denom += std::exp(scores[idx[i]] - max_kept);
    }
    for (int i = 0; i < k; ++i) {
        g.weights[idx[i]] = std::exp(scores[idx[i]] - max_kept) / denom;
    }
    return g;
}

namespace {

std::vector<int> nonzero_indices(const GateWeights &gates) {
    std::vector<int> idx;
    for (int j = 0; j < static_cast<int>(gates.weights.size()); ++j) {
        if (gates.weights[j] != 0.0) idx.push_back(j);
    }
    if (idx.empty()) {
        throw std::invalid_argument("smoe_combine: all gate weights are zero");
    }
    return idx;
}

} // namespace

std::vector<double> smoe_combine(const GateWeights &gates,
                                 const std::vector<std::vector<double>> &expert_outputs) {
    if (expert_outputs.size() != gates.weights.size()) {
        throw std::invalid_argument("smoe_combine: expert count != gate count");
    }
    const std::vector<int> idx = nonzero_indices(gates);
    const std::size_t shape = expert_outputs[static_cast<std::size_t>(idx[0])].size();
    for (int j : idx) {
        if (expert_outputs[static_cast<std::size_t>(j)].size() != shape) {
            throw std::invalid_argument("smoe_combine: expert output shapes differ");
        }
    }
    // A one-hot gate is pure dispatch: return the selected output verbatim.
    if (idx.size() == 1 && gates.weights[static_cast<std::size_t>(idx[0])] == 1.0) {
        return expert_outputs[static_cast<std::size_t>(idx[0])];
    }
    std::vector<double> acc(shape, 0.0);
    for (int j : idx) {
        const double w = gates.weights[static_cast<std::size_t>(j)];
        const std::vector<double> &out = expert_outputs[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < shape; ++i) {
            acc[i] += w * out[i];
        }
    }
    return acc;
}

std::vector<double> smoe_combine(
    const GateWeights &gates,
    const std::vector<std::function<std::vector<double>()>> &experts) {
    if (experts.size() != gates.weights.size()) {
        throw std::invalid_argument("smoe_combine: expert count != gate count");
    }
    const std::vector<int> idx = nonzero_indices(gates);
    // Zero-weight experts are never invoked.
    std::vector<std::vector<double>> outputs;
    outputs.reserve(idx.size());
    for (int j : idx) {
        outputs.push_back(experts[static_cast<std::size_t>(j)]());
    }
    const std::size_t shape = outputs[0].size();
    for (const auto &out : outputs) {
        if (out.size() != shape) {
            throw std::invalid_argument("smoe_combine: expert output shapes differ");
        }
    }
    if (idx.size() == 1 && gates.weights[static_cast<std::size_t>(idx[0])] == 1.0) {
        return outputs[0];
    }
    std::vector<double> acc(shape, 0.0);
    for (std::size_t t = 0; t < idx.size(); ++t) {
        const double w = gates.weights[static_cast<std::size_t>(idx[t])];
        for (std::size_t i = 0; i < shape; ++i) {
            acc[i] += w * outputs[t][i];
        }
    }
    return acc;
}

} // namespace rectiwarp
