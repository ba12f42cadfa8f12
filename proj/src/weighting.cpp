#include "msbt/weighting.hpp"

#include "msbt/error.hpp"
#include "msbt/ops.hpp"

namespace msbt {
namespace {

void validate_pairs(const FusedPairSet& fps, const char* op) {
    if (fps.pairs.empty() || fps.pairs.size() != fps.fused.size() ||
        fps.pairs.size() != fps.final_tokens.size()) {
        throw ContractError(std::string(op) + ": fused pair set is incomplete");
    }
    for (size_t i = 0; i < fps.size(); ++i) {
        if (!fps.fused[i].defined() || !fps.final_tokens[i].defined()) {
            throw ContractError(std::string(op) + ": missing entry for pair " +
                                fps.pairs[i].name());
        }
        if (fps.final_tokens[i].shape() != fps.final_tokens[0].shape()) {
            throw ContractError(std::string(op) + ": final token shapes disagree between pairs");
        }
    }
}

}  // namespace

WeightHeadParams WeightHeadParams::init(size_t width, size_t heads, size_t layers, Rng& rng) {
    if (layers == 0) throw ConfigError("weight head: needs at least one transformer layer");
    WeightHeadParams p;
    for (size_t l = 0; l < layers; ++l) {
        p.stack.push_back(TransformerLayerParams::init(width, heads, rng));
    }
    p.theta = MlpParams::init(width, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor>> WeightHeadParams::named(
    const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (size_t l = 0; l < stack.size(); ++l) {
        auto layer = stack[l].named(prefix + ".layer" + std::to_string(l));
        out.insert(out.end(), layer.begin(), layer.end());
    }
    auto th = theta.named(prefix + ".theta");
    out.insert(out.end(), th.begin(), th.end());
    return out;
}

Tensor compute_weights(const FusedPairSet& fps, const WeightHeadParams& p) {
    validate_pairs(fps, "compute_weights");
    const size_t n_f = fps.size();
    const size_t block = fps.final_tokens[0].rows();

    Tensor stacked = concat(fps.final_tokens, 0);  // [(N_F * block) x D_E]
    for (const auto& layer : p.stack) stacked = transformer_layer(stacked, layer);

    // Mean-pool each pair's token block (identity when the schedule ends at
    // one token), then regress per pair.
    std::vector<Tensor> pooled;
    pooled.reserve(n_f);
    auto blocks = split(stacked, 0, std::vector<size_t>(n_f, block));
    for (const auto& b : blocks) pooled.push_back(mean_axis(b, 0));
    Tensor w = p.theta.forward(concat(pooled, 0));  // [N_F x 1]
    return reshape(w, {n_f});
}

std::vector<Tensor> apply_weights(const FusedPairSet& fps, const Tensor& w) {
    validate_pairs(fps, "apply_weights");
    if (w.shape().size() != 1 || w.numel() != fps.size()) {
        throw DimensionError("apply_weights: got " + std::to_string(w.numel()) +
                             " weights for " + std::to_string(fps.size()) + " pairs");
    }
    auto scalars = split(reshape(w, {fps.size(), 1}), 0, std::vector<size_t>(fps.size(), 1));
    std::vector<Tensor> out;
    out.reserve(fps.size());
    for (size_t i = 0; i < fps.size(); ++i) {
        out.push_back(mul(fps.fused[i], scalars[i]));
    }
    return out;
}

Tensor concat_pairs(const std::vector<Tensor>& pair_features) {
    if (pair_features.empty()) throw ContractError("concat_pairs: no pair features");
    return concat(pair_features, 1);
}

Tensor weighted_concat(const FusedPairSet& fps, const Tensor& w) {
    return concat_pairs(apply_weights(fps, w));
}

}  // namespace msbt
