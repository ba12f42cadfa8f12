#include "msbt/fusion.hpp"

#include <atomic>
#include <cstdio>

#include "msbt/error.hpp"
#include "msbt/ops.hpp"

namespace msbt {

std::vector<size_t> token_schedule(size_t n1, size_t layers) {
    if (n1 == 0 || layers == 0) throw ConfigError("token_schedule: n1 and layers must be >= 1");
    std::vector<size_t> sched;
    sched.reserve(layers);
    size_t n = n1;
    for (size_t l = 0; l < layers; ++l) {
        if (n == 0) {
            throw ConfigError("token_schedule: halving from n1=" + std::to_string(n1) +
                              " reaches zero tokens at layer " + std::to_string(l + 1) + " of " +
                              std::to_string(layers));
        }
        sched.push_back(n);
        n /= 2;
    }
    return sched;
}

std::vector<size_t> fixed_schedule(size_t n, size_t layers) {
    if (n == 0 || layers == 0) throw ConfigError("fixed_schedule: n and layers must be >= 1");
    return std::vector<size_t>(layers, n);
}

MSBTPairParams MSBTPairParams::init(std::vector<size_t> schedule, size_t width, size_t heads,
                                    bool cross_enabled, Rng& rng) {
    if (schedule.empty()) throw ConfigError("msbt pair: empty schedule");
    MSBTPairParams p;
    p.schedule = std::move(schedule);
    p.cross_enabled = cross_enabled;
    const size_t layers = p.schedule.size();
    for (size_t l = 0; l < layers; ++l) {
        p.condense.push_back(TransformerLayerParams::init(width, heads, rng));
        p.transmit.push_back(TransformerLayerParams::init(width, heads, rng));
    }
    if (cross_enabled) {
        for (size_t l = 0; l + 1 < layers; ++l) {
            p.carry.push_back(TransformerLayerParams::init(width, heads, rng));
        }
    }
    for (size_t l = 0; l < layers; ++l) {
        // Gaussian(0, 0.15) token sets: tokens[0] enters layer 1, tokens[l]
        // is the fresh set consumed at layer l+1.
        std::vector<double> v(p.schedule[l] * width);
        for (auto& x : v) x = rng.gaussian(0.0, 0.15);
        p.tokens.push_back(Tensor({p.schedule[l], width}, std::move(v), true));
    }
    return p;
}

std::vector<std::pair<std::string, Tensor>> MSBTPairParams::named(
    const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (size_t l = 0; l < condense.size(); ++l) {
        auto c = condense[l].named(prefix + ".condense" + std::to_string(l));
        out.insert(out.end(), c.begin(), c.end());
        auto t = transmit[l].named(prefix + ".transmit" + std::to_string(l));
        out.insert(out.end(), t.begin(), t.end());
    }
    for (size_t l = 0; l < carry.size(); ++l) {
        auto c = carry[l].named(prefix + ".carry" + std::to_string(l));
        out.insert(out.end(), c.begin(), c.end());
    }
    for (size_t l = 0; l < tokens.size(); ++l) {
        out.emplace_back(prefix + ".tokens" + std::to_string(l), tokens[l]);
    }
    return out;
}

PairFusion fuse_pair(const Tensor& za, const Tensor& zb, const MSBTPairParams& p) {
    if (za.shape().size() != 2 || zb.shape().size() != 2 || za.rows() != zb.rows() ||
        za.cols() != zb.cols()) {
        throw DimensionError("fuse_pair: feature shapes disagree: " + shape_str(za.shape()) +
                             " vs " + shape_str(zb.shape()));
    }
    const size_t t = za.rows();
    const size_t layers = p.schedule.size();

    Tensor stream_a = za;
    Tensor stream_b = zb;
    Tensor bt = p.tokens[0];
    Tensor refined;
    for (size_t l = 0; l < layers; ++l) {
        const size_t n_bt = p.schedule[l];
        // Refine tokens against the source stream.
        Tensor out_a = transformer_layer(concat({stream_a, bt}, 0), p.condense[l]);
        auto parts_a = split(out_a, 0, {t, n_bt});
        stream_a = parts_a[0];
        refined = parts_a[1];
        // Transmit into the target stream; the token half of this output is
        // computed but unused downstream.
        Tensor out_b = transformer_layer(concat({stream_b, refined}, 0), p.transmit[l]);
        auto parts_b = split(out_b, 0, {t, n_bt});
        stream_b = parts_b[0];
        if (l + 1 < layers) {
            const Tensor& fresh = p.tokens[l + 1];
            bt = p.cross_enabled ? cross_transformer(fresh, refined, p.carry[l]) : fresh;
        }
    }
    return {stream_b, refined};
}

FusedPairSet fuse_all_pairs(const std::vector<std::pair<Modality, Tensor>>& features,
                            const std::map<std::string, MSBTPairParams>& pair_params) {
    if (features.size() < 2) {
        throw ConfigError("fuse_all_pairs: need at least 2 modalities, got " +
                          std::to_string(features.size()));
    }
    std::vector<Modality> mods;
    for (const auto& [m, f] : features) mods.push_back(m);
    auto find_features = [&](Modality m) -> const Tensor& {
        for (const auto& [mm, f] : features) {
            if (mm == m) return f;
        }
        throw ContractError("fuse_all_pairs: missing modality features");
    };

    FusedPairSet out;
    out.pairs = ordered_pairs(mods);
    for (const auto& pair : out.pairs) {
        auto it = pair_params.find(pair.name());
        if (it == pair_params.end()) {
            throw ContractError("fuse_all_pairs: no parameters for pair " + pair.name());
        }
        const Tensor& za = find_features(pair.src);
        const size_t t = za.rows();
        const size_t n1 = it->second.schedule.front();
        if (n1 >= t) {
            static std::atomic<bool> warned{false};
            if (!warned.exchange(true)) {
                std::fprintf(stderr,
                             "warning: bottleneck token count n1=%zu >= T=%zu; the bottleneck "
                             "no longer compresses\n",
                             n1, t);
            }
        }
        PairFusion f = fuse_pair(za, find_features(pair.dst), it->second);
        out.fused.push_back(f.fused);
        out.final_tokens.push_back(f.final_tokens);
    }
    return out;
}

}  // namespace msbt
