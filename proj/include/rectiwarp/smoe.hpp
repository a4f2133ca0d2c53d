#pragma once

#include <functional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rectiwarp {

// Result of top-k softmax gating: non-negative weights summing to 1 with at
// most k nonzero entries.
struct GateWeights {
    std::vector<double> weights;
    int k = 1;

    // Index of the largest weight (lowest index on ties).
    int argmax() const;
};

void to_json(nlohmann::json &j, const GateWeights &g);

// Scores outside the top k are excluded before the softmax, so exactly the
// top k (ties broken toward the lowest index) carry positive weight, and
// the kept weights are the softmax of the kept scores. Throws
// std::invalid_argument for k out of [1, scores.size()] or non-finite
// scores.
GateWeights topk_softmax(const std::vector<double> &scores, int k);

// Weighted sum of expert outputs. Experts with zero gate weight do not
// participate; with k=1 the result is bit-equal to the selected expert's
// output.
std::vector<double> smoe_combine(const GateWeights &gates,
                                 const std::vector<std::vector<double>> &expert_outputs);

// Lazy variant: experts are callbacks, invoked only when their gate weight
// is nonzero (the sparsity contract).
std::vector<double> smoe_combine(const GateWeights &gates,
                                 const std::vector<std::function<std::vector<double>()>> &experts);

} // namespace rectiwarp
