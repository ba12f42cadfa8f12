#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "msbt/modality.hpp"

namespace msbt {

// Full model hyperparameters. Defaults are the trained configuration:
// 128-wide embeddings, 4 heads, 1 unimodal layer, 5 fusion layers starting
// from 16 bottleneck tokens, 1 weighting layer, 4 global layers, tau 0.5,
// top-9 MIL, lambda 0.1.
struct ModelConfig {
    std::vector<Modality> modalities = {Modality::Rgb, Modality::Flow, Modality::Audio};
    std::map<Modality, size_t> input_dims;  // per-modality raw feature width

    size_t d_e = 128;
    size_t heads = 4;
    size_t l_u = 1;
    size_t l_m = 5;
    size_t n_bt1 = 16;
    size_t l_w = 1;
    size_t l_g = 4;

    double tau = 0.5;
    size_t topk = 9;
    double lambda = 0.1;

    bool cross_transformer = true;
    bool weighting = true;
    size_t fixed_tokens = 0;  // 0 = halving schedule, otherwise a constant count

    void validate() const;
    size_t n_pairs() const { return modalities.size() * (modalities.size() - 1); }
    size_t fused_width() const { return n_pairs() * d_e; }
    std::vector<size_t> schedule() const;
};

struct TrainConfig {
    size_t epochs = 50;
    size_t batch_size = 128;
    double lr = 0.005;
    double momentum = 0.0;
    double weight_decay = 0.0;
    double grad_clip = 0.0;  // global norm; 0 disables
    uint64_t seed = 1;
    size_t threads = 1;

    void validate() const;
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
};

// Scaled-down presets for desk-size experiments and gradient checking.
ModelConfig reduced_model_config();  // d_e=16, l_m=3, n_bt1=4, l_g=2
ModelConfig toy_model_config();      // 2 modalities, d_e=8, l_m=2, n_bt1=2, one layer everywhere
RunConfig preset_config(const std::string& name);  // "default" | "reduced" | "toy"

// Line-oriented "key = value" text with "#" comments. Unknown keys are
// configuration errors. config_to_text round-trips exactly.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
std::string config_to_text(const RunConfig& cfg);
RunConfig load_config_file(const std::string& path, RunConfig base = {});

}  // namespace msbt
