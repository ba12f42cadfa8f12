#pragma once

#include <map>
#include <optional>
#include <string>

#include "msbt/config.hpp"
#include "msbt/data.hpp"
#include "msbt/encoders.hpp"
#include "msbt/fusion.hpp"
#include "msbt/weighting.hpp"

namespace msbt {

struct ForwardResult {
    Tensor scores;                       // {T}, each in (0, 1)
    std::vector<Tensor> weighted_pairs;  // fixed pair order; unweighted when disabled
    Tensor weights;                      // {N_F}; undefined when weighting is disabled
};

// The assembled network: unimodal encoders, pairwise bottleneck fusion,
// token-based weighting, global encoder and scoring head. Parameters live in
// a name-keyed registry shared (by storage) with the typed sub-structures.
class Model {
public:
    Model(ModelConfig cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    const std::map<std::string, Tensor>& parameters() const { return params_; }
    size_t parameter_count() const;

    // unimodal encode -> fuse all pairs -> weights -> concat -> global score.
    ForwardResult forward(const VideoSample& sample) const;

    void zero_grad();

    // Deep copy with independent storage (worker-thread replicas).
    Model clone() const;
    // Overwrites this model's parameter values from src (same architecture).
    void copy_values_from(const Model& src);

private:
    ModelConfig cfg_;
    UnimodalEncoderParams unimodal_;
    std::map<std::string, MSBTPairParams> msbt_;
    std::optional<WeightHeadParams> weight_head_;
    GlobalHeadParams global_;
    std::map<std::string, Tensor> params_;
};

}  // namespace msbt
