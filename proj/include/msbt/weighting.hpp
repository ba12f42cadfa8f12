#pragma once

#include <string>
#include <vector>

#include "msbt/encoders.hpp"
#include "msbt/fusion.hpp"

namespace msbt {

// Derives one scalar weight per ordered pair from the stacked final
// bottleneck tokens: transformer over the stack, mean-pool per pair block,
// then the three-layer regressor with sigmoid.
struct WeightHeadParams {
    std::vector<TransformerLayerParams> stack;
    MlpParams theta;

    static WeightHeadParams init(size_t width, size_t heads, size_t layers, Rng& rng);
    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

// -> {N_F} weights, each in (0, 1).
Tensor compute_weights(const FusedPairSet& fps, const WeightHeadParams& p);

// Scales each pair's fused feature by its scalar weight (kept in the graph so
// gradients reach the weight head).
std::vector<Tensor> apply_weights(const FusedPairSet& fps, const Tensor& w);

// Feature-axis concatenation of per-pair blocks in the fixed order.
Tensor concat_pairs(const std::vector<Tensor>& pair_features);

// apply_weights + concat_pairs: [T x (N_F * D_E)].
Tensor weighted_concat(const FusedPairSet& fps, const Tensor& w);

}  // namespace msbt
