#pragma once

#include <map>
#include <string>
#include <vector>

#include "msbt/attention.hpp"
#include "msbt/modality.hpp"
#include "msbt/tensor.hpp"

namespace msbt {

// Bottleneck token counts per fusion layer: [n1, n1/2, n1/4, ...] (floor).
// Throws ConfigError naming the first layer whose count would reach zero.
std::vector<size_t> token_schedule(size_t n1, size_t layers);

// Ablation alternative: the same count at every layer.
std::vector<size_t> fixed_schedule(size_t n, size_t layers);

// Per ordered-pair fusion parameters. `condense` refines the bottleneck
// tokens against the source modality, `transmit` passes them into the target
// modality, `carry` moves condensed tokens to the next layer's (smaller)
// fresh token set via cross-attention. tokens[0] is the layer-1 token set;
// tokens[l] for l >= 1 are the fresh sets consumed at layer l+1. All token
// sets are learnable, initialized N(0, 0.15).
struct MSBTPairParams {
    std::vector<size_t> schedule;
    std::vector<TransformerLayerParams> condense;  // one per layer
    std::vector<TransformerLayerParams> transmit;  // one per layer
    std::vector<TransformerLayerParams> carry;     // layers-1, empty when disabled
    std::vector<Tensor> tokens;
    bool cross_enabled = true;

    static MSBTPairParams init(std::vector<size_t> schedule, size_t width, size_t heads,
                               bool cross_enabled, Rng& rng);
    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

struct PairFusion {
    Tensor fused;         // [T x D_E], the target-side stream after the last layer
    Tensor final_tokens;  // [schedule.back() x D_E], refined tokens of the last layer
};

// Runs the layered bottleneck fusion of source-modality features za into
// target-modality features zb. Asymmetric by construction.
PairFusion fuse_pair(const Tensor& za, const Tensor& zb, const MSBTPairParams& p);

// The ordered collection of pairwise fusions in the fixed pair order.
struct FusedPairSet {
    std::vector<ModalityPair> pairs;
    std::vector<Tensor> fused;
    std::vector<Tensor> final_tokens;

    size_t size() const { return pairs.size(); }
};

// Fuses every ordered pair of the given per-modality features (canonical pair
// order), using that pair's own parameters. Needs at least two modalities.
FusedPairSet fuse_all_pairs(const std::vector<std::pair<Modality, Tensor>>& features,
                            const std::map<std::string, MSBTPairParams>& pair_params);

}  // namespace msbt
