#include "msbt/attention.hpp"

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

void check_width(const Tensor& t, const TransformerLayerParams& p, const char* what) {
    if (t.shape().size() != 2 || t.cols() != p.width) {
        throw DimensionError(std::string(what) + ": input " + shape_str(t.shape()) +
                             " does not match layer width " + std::to_string(p.width));
    }
}

// Multi-head scaled dot-product attention; queries from hq, keys/values from hkv.
Tensor attention(const Tensor& hq, const Tensor& hkv, const TransformerLayerParams& p) {
    const size_t dh = p.width / p.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor q = matmul(hq, p.wq);
    Tensor k = matmul(hkv, p.wk);
    Tensor v = matmul(hkv, p.wv);
    std::vector<Tensor> heads;
    heads.reserve(p.heads);
    for (size_t h = 0; h < p.heads; ++h) {
        Tensor qh = slice(q, 1, h * dh, dh);
        Tensor kh = slice(k, 1, h * dh, dh);
        Tensor vh = slice(v, 1, h * dh, dh);
        Tensor attn = softmax_rows(mul_scalar(matmul_nt(qh, kh), scale));
        heads.push_back(matmul(attn, vh));
    }
    return matmul(concat(heads, 1), p.wo);
}

Tensor ffn(const Tensor& x, const TransformerLayerParams& p) {
    Tensor h = gelu(add(matmul(x, p.ffn_w1), p.ffn_b1));
    return add(matmul(h, p.ffn_w2), p.ffn_b2);
}

}  // namespace

TransformerLayerParams TransformerLayerParams::init(size_t width, size_t heads, Rng& rng,
                                                    size_t ffn_width) {
    if (width == 0 || heads == 0 || width % heads != 0) {
        throw ConfigError("transformer layer: width " + std::to_string(width) +
                          " not divisible by heads " + std::to_string(heads));
    }
    TransformerLayerParams p;
    p.width = width;
    p.heads = heads;
    p.ffn_width = ffn_width ? ffn_width : 4 * width;
    p.wq = uniform_init({width, width}, width, rng);
    p.wk = uniform_init({width, width}, width, rng);
    p.wv = uniform_init({width, width}, width, rng);
    p.wo = uniform_init({width, width}, width, rng);
    p.ffn_w1 = uniform_init({width, p.ffn_width}, width, rng);
    p.ffn_b1 = Tensor({p.ffn_width}, 0.0, true);
    p.ffn_w2 = uniform_init({p.ffn_width, width}, p.ffn_width, rng);
    p.ffn_b2 = Tensor({width}, 0.0, true);
    p.ln1_gamma = Tensor({width}, 1.0, true);
    p.ln1_beta = Tensor({width}, 0.0, true);
    p.ln2_gamma = Tensor({width}, 1.0, true);
    p.ln2_beta = Tensor({width}, 0.0, true);
    return p;
}

std::vector<std::pair<std::string, Tensor>> TransformerLayerParams::named(
    const std::string& prefix) const {
    return {
        {prefix + ".attn.wq", wq},       {prefix + ".attn.wk", wk},
        {prefix + ".attn.wv", wv},       {prefix + ".attn.wo", wo},
        {prefix + ".ffn.w1", ffn_w1},    {prefix + ".ffn.b1", ffn_b1},
        {prefix + ".ffn.w2", ffn_w2},    {prefix + ".ffn.b2", ffn_b2},
        {prefix + ".ln1.gamma", ln1_gamma}, {prefix + ".ln1.beta", ln1_beta},
        {prefix + ".ln2.gamma", ln2_gamma}, {prefix + ".ln2.beta", ln2_beta},
    };
}

Tensor transformer_layer(const Tensor& z, const TransformerLayerParams& p) {
    check_width(z, p, "transformer_layer");
    Tensor h = layernorm(z, p.ln1_gamma, p.ln1_beta);
    Tensor zhat = add(attention(h, h, p), z);
    Tensor h2 = layernorm(zhat, p.ln2_gamma, p.ln2_beta);
    return add(ffn(h2, p), zhat);
}

Tensor cross_transformer(const Tensor& x, const Tensor& y, const TransformerLayerParams& p) {
    check_width(x, p, "cross_transformer");
    check_width(y, p, "cross_transformer");
    Tensor hx = layernorm(x, p.ln1_gamma, p.ln1_beta);
    Tensor hy = layernorm(y, p.ln1_gamma, p.ln1_beta);
    Tensor zhat = add(attention(hx, hy, p), x);
    Tensor h2 = layernorm(zhat, p.ln2_gamma, p.ln2_beta);
    return add(ffn(h2, p), zhat);
}

}  // namespace msbt
