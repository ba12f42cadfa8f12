#include "msbt/model.hpp"

#include "msbt/error.hpp"
#include "msbt/ops.hpp"

namespace msbt {

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    // Keep the configured modalities in canonical order; everything
    // downstream (pair order, manifest columns, naming) relies on it.
    cfg_.modalities = parse_modalities(modalities_str(cfg_.modalities));

    Rng rng(seed);
    auto add_named = [this](std::vector<std::pair<std::string, Tensor>> named) {
        for (auto& [name, t] : named) {
            if (!params_.emplace(name, t).second) {
                throw ContractError("model: duplicate parameter name '" + name + "'");
            }
        }
    };

    std::map<Modality, size_t> dims;
    for (Modality m : cfg_.modalities) dims[m] = cfg_.input_dims.at(m);
    unimodal_ = UnimodalEncoderParams::init(dims, cfg_.d_e, cfg_.heads, cfg_.l_u, rng);
    add_named(unimodal_.named("unimodal"));

    const auto schedule = cfg_.schedule();
    for (const auto& pair : ordered_pairs(cfg_.modalities)) {
        auto p = MSBTPairParams::init(schedule, cfg_.d_e, cfg_.heads, cfg_.cross_transformer,
                                      rng);
        add_named(p.named("msbt." + pair.name()));
        msbt_.emplace(pair.name(), std::move(p));
    }

    if (cfg_.weighting) {
        weight_head_ = WeightHeadParams::init(cfg_.d_e, cfg_.heads, cfg_.l_w, rng);
        add_named(weight_head_->named("weight"));
    }

    global_ = GlobalHeadParams::init(cfg_.fused_width(), cfg_.heads, cfg_.l_g, rng);
    add_named(global_.named("global"));
}

size_t Model::parameter_count() const {
    size_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

ForwardResult Model::forward(const VideoSample& sample) const {
    std::vector<std::pair<Modality, Tensor>> encoded;
    encoded.reserve(cfg_.modalities.size());
    for (Modality m : cfg_.modalities) {
        if (!sample.has_modality(m)) {
            throw ContractError("video '" + sample.id + "': missing modality '" +
                                std::string(1, modality_letter(m)) + "' required by the model");
        }
        encoded.emplace_back(m, unimodal_encode(sample.features_for(m), m, unimodal_));
    }

    FusedPairSet fps = fuse_all_pairs(encoded, msbt_);

    ForwardResult out;
    if (weight_head_) {
        out.weights = compute_weights(fps, *weight_head_);
        out.weighted_pairs = apply_weights(fps, out.weights);
    } else {
        out.weighted_pairs = fps.fused;
    }
    Tensor zhat = concat_pairs(out.weighted_pairs);
    out.scores = global_encode_and_score(zhat, global_);
    return out;
}

void Model::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

Model Model::clone() const {
    Model copy(cfg_, 0);
    copy.copy_values_from(*this);
    return copy;
}

void Model::copy_values_from(const Model& src) {
    if (src.params_.size() != params_.size()) {
        throw ContractError("model copy: parameter sets differ");
    }
    for (auto& [name, t] : params_) {
        auto it = src.params_.find(name);
        if (it == src.params_.end() || it->second.shape() != t.shape()) {
            throw ContractError("model copy: parameter '" + name + "' missing or mismatched");
        }
        t.leaf_values() = it->second.values();
    }
}

}  // namespace msbt
