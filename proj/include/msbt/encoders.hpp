#pragma once

#include <map>
#include <string>
#include <vector>

#include "msbt/attention.hpp"
#include "msbt/modality.hpp"
#include "msbt/tensor.hpp"

namespace msbt {

// Three affine layers tapering in/2 -> in/4 -> 1 with GELU between and a
// final sigmoid, applied row-wise. Serves as both regressors (per-pair
// weights and per-snippet anomaly scores).
struct MlpParams {
    Tensor w1, b1, w2, b2, w3, b3;

    static MlpParams init(size_t in_width, Rng& rng);
    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;

    // [N x in] -> [N x 1], every output strictly in (0, 1).
    Tensor forward(const Tensor& x) const;
};

// Modality-specific linear projection to the shared width plus one
// modality-shared transformer stack (the same parameter storage serves every
// modality).
struct UnimodalEncoderParams {
    size_t embed_width = 0;
    std::map<Modality, std::pair<Tensor, Tensor>> proj;  // weight [D_m x D_E], bias [D_E]
    std::vector<TransformerLayerParams> shared_stack;

    static UnimodalEncoderParams init(const std::map<Modality, size_t>& input_dims,
                                      size_t embed_width, size_t heads, size_t layers,
                                      Rng& rng);
    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

// Projects [T x D_m] snippets to [T x D_E] and aggregates context with the
// shared stack.
Tensor unimodal_encode(const Tensor& raw, Modality m, const UnimodalEncoderParams& p);

// Global context over fused tokens plus the scoring head.
struct GlobalHeadParams {
    std::vector<TransformerLayerParams> stack;
    MlpParams omega;

    static GlobalHeadParams init(size_t width, size_t heads, size_t layers, Rng& rng);
    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

// [T x width] -> scores {T}, each strictly in (0, 1).
Tensor global_encode_and_score(const Tensor& zhat, const GlobalHeadParams& p);

}  // namespace msbt
