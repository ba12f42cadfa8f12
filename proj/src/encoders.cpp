#include "msbt/encoders.hpp"

#include <cmath>

#include "msbt/error.hpp"
#include "msbt/ops.hpp"

namespace msbt {
namespace {

Tensor uniform_init(Shape shape, size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(numel_of(shape));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace

MlpParams MlpParams::init(size_t in_width, Rng& rng) {
    if (in_width == 0) throw ConfigError("mlp: zero input width");
    const size_t h1 = std::max<size_t>(1, in_width / 2);
    const size_t h2 = std::max<size_t>(1, in_width / 4);
    MlpParams p;
    p.w1 = uniform_init({in_width, h1}, in_width, rng);
    p.b1 = Tensor({h1}, 0.0, true);
    p.w2 = uniform_init({h1, h2}, h1, rng);
    p.b2 = Tensor({h2}, 0.0, true);
    p.w3 = uniform_init({h2, 1}, h2, rng);
    p.b3 = Tensor({1}, 0.0, true);
    return p;
}

std::vector<std::pair<std::string, Tensor>> MlpParams::named(const std::string& prefix) const {
    return {{prefix + ".w1", w1}, {prefix + ".b1", b1}, {prefix + ".w2", w2},
            {prefix + ".b2", b2}, {prefix + ".w3", w3}, {prefix + ".b3", b3}};
}

Tensor MlpParams::forward(const Tensor& x) const {
    if (x.shape().size() != 2 || x.cols() != w1.rows()) {
        throw DimensionError("mlp: input " + shape_str(x.shape()) + " does not match weight " +
                             shape_str(w1.shape()));
    }
    Tensor h = gelu(add(matmul(x, w1), b1));
    h = gelu(add(matmul(h, w2), b2));
    // The sigmoid rounds to exactly 0.0/1.0 in double once |logit| > ~37;
    // clamping keeps the strict (0,1) output contract at saturation.
    return clamp(sigmoid(add(matmul(h, w3), b3)), 1e-12, 1.0 - 1e-12);
}

UnimodalEncoderParams UnimodalEncoderParams::init(const std::map<Modality, size_t>& input_dims,
                                                  size_t embed_width, size_t heads,
                                                  size_t layers, Rng& rng) {
    if (input_dims.empty()) throw ConfigError("unimodal encoder: no modalities configured");
    UnimodalEncoderParams p;
    p.embed_width = embed_width;
    for (const auto& [m, dim] : input_dims) {
        if (dim == 0) throw ConfigError("unimodal encoder: zero input dim");
        Tensor w = uniform_init({dim, embed_width}, dim, rng);
        Tensor b = Tensor({embed_width}, 0.0, true);
        p.proj.emplace(m, std::make_pair(w, b));
    }
    p.shared_stack.reserve(layers);
    for (size_t l = 0; l < layers; ++l) {
        p.shared_stack.push_back(TransformerLayerParams::init(embed_width, heads, rng));
    }
    return p;
}

std::vector<std::pair<std::string, Tensor>> UnimodalEncoderParams::named(
    const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& [m, wb] : proj) {
        const std::string base = prefix + ".proj." + modality_letter(m);
        out.emplace_back(base + ".w", wb.first);
        out.emplace_back(base + ".b", wb.second);
    }
    for (size_t l = 0; l < shared_stack.size(); ++l) {
        auto layer = shared_stack[l].named(prefix + ".layer" + std::to_string(l));
        out.insert(out.end(), layer.begin(), layer.end());
    }
    return out;
}

Tensor unimodal_encode(const Tensor& raw, Modality m, const UnimodalEncoderParams& p) {
    auto it = p.proj.find(m);
    if (it == p.proj.end()) {
        throw ConfigError(std::string("unimodal_encode: modality '") + modality_letter(m) +
                          "' is not configured");
    }
    const Tensor& w = it->second.first;
    if (raw.shape().size() != 2 || raw.cols() != w.rows()) {
        throw DimensionError(std::string("unimodal_encode: features ") + shape_str(raw.shape()) +
                             " do not match projection " + shape_str(w.shape()) +
                             " for modality '" + modality_letter(m) + "'");
    }
    Tensor z = add(matmul(raw, w), it->second.second);
    for (const auto& layer : p.shared_stack) z = transformer_layer(z, layer);
    return z;
}

GlobalHeadParams GlobalHeadParams::init(size_t width, size_t heads, size_t layers, Rng& rng) {
    GlobalHeadParams p;
    p.stack.reserve(layers);
    for (size_t l = 0; l < layers; ++l) {
        p.stack.push_back(TransformerLayerParams::init(width, heads, rng));
    }
    p.omega = MlpParams::init(width, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor>> GlobalHeadParams::named(
    const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (size_t l = 0; l < stack.size(); ++l) {
        auto layer = stack[l].named(prefix + ".layer" + std::to_string(l));
        out.insert(out.end(), layer.begin(), layer.end());
    }
    auto om = omega.named(prefix + ".omega");
    out.insert(out.end(), om.begin(), om.end());
    return out;
}

Tensor global_encode_and_score(const Tensor& zhat, const GlobalHeadParams& p) {
    Tensor z = zhat;
    for (const auto& layer : p.stack) z = transformer_layer(z, layer);
    Tensor s = p.omega.forward(z);
    return reshape(s, {s.rows()});
}

}  // namespace msbt
