#pragma once

#include <string>
#include <vector>

#include "msbt/rng.hpp"
#include "msbt/tensor.hpp"

namespace msbt {

// Pre-norm transformer layer parameters: per-head Q/K/V projections stored as
// fused width x width matrices (head h owns columns [h*dh, (h+1)*dh)), an
// output projection, a GELU FFN with biases, and two layernorm pairs.
struct TransformerLayerParams {
    size_t width = 0;
    size_t heads = 0;
    size_t ffn_width = 0;

    Tensor wq, wk, wv, wo;
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;

    // Uniform(+-1/sqrt(fan_in)) weights, zero biases, identity layernorm.
    // ffn_width defaults to 4*width.
    static TransformerLayerParams init(size_t width, size_t heads, Rng& rng,
                                       size_t ffn_width = 0);

    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

// z_hat = MSA(LN(z)) + z; out = FFN(LN(z_hat)) + z_hat. Scaled dot-product
// attention with scale 1/sqrt(width/heads); no positional encoding, so the
// layer is permutation-equivariant over tokens.
Tensor transformer_layer(const Tensor& z, const TransformerLayerParams& p);

// Same layer structure, but queries come from x and keys/values from y; the
// residual stream follows x (output has x's row count). Both streams pass
// through the layer's first layernorm.
Tensor cross_transformer(const Tensor& x, const Tensor& y, const TransformerLayerParams& p);

}  // namespace msbt
