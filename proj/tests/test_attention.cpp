#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msbt/attention.hpp"
#include "msbt/error.hpp"
#include "msbt/gradcheck.hpp"
#include "msbt/ops.hpp"

using namespace msbt;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, bool requires_grad = false) {
    std::vector<double> v(numel_of(shape));
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor permute_rows(const Tensor& t, const std::vector<size_t>& perm) {
    const size_t n = t.cols();
    std::vector<double> out(t.numel());
    for (size_t i = 0; i < perm.size(); ++i) {
        std::copy(t.values().begin() + perm[i] * n, t.values().begin() + (perm[i] + 1) * n,
                  out.begin() + i * n);
    }
    return Tensor(t.shape(), std::move(out));
}

void zero_out(Tensor& t) {
    auto& v = t.leaf_values();
    std::fill(v.begin(), v.end(), 0.0);
}

}  // namespace

TEST_CASE("width must be divisible by head count") {
    Rng rng(1);
    CHECK_THROWS_AS(TransformerLayerParams::init(10, 4, rng), ConfigError);
    CHECK_NOTHROW(TransformerLayerParams::init(8, 4, rng));
}

TEST_CASE("zeroed value/output and FFN branches reduce the layer to identity") {
    Rng rng(2);
    auto p = TransformerLayerParams::init(8, 4, rng);
    zero_out(p.wv);
    zero_out(p.wo);
    zero_out(p.ffn_w2);
    zero_out(p.ffn_b2);
    for (size_t n : {1u, 3u}) {
        Tensor z = random_tensor(rng, {n, 8});
        Tensor out = transformer_layer(z, p);
        CHECK(out.values() == z.values());
    }
}

TEST_CASE("self-attention layer is permutation-equivariant over tokens") {
    Rng rng(3);
    auto p = TransformerLayerParams::init(12, 4, rng);
    Tensor z = random_tensor(rng, {5, 12});
    std::vector<size_t> perm = {3, 0, 4, 1, 2};
    Tensor a = transformer_layer(permute_rows(z, perm), p);
    Tensor b = permute_rows(transformer_layer(z, p), perm);
    REQUIRE(a.shape() == b.shape());
    for (size_t i = 0; i < a.numel(); ++i) {
        CHECK(a.value_at(i) == doctest::Approx(b.value_at(i)).epsilon(1e-12));
    }
}

TEST_CASE("layer rejects width mismatches") {
    Rng rng(4);
    auto p = TransformerLayerParams::init(8, 4, rng);
    Tensor bad = random_tensor(rng, {3, 6});
    CHECK_THROWS_AS(transformer_layer(bad, p), DimensionError);
    CHECK_THROWS_AS(cross_transformer(bad, bad, p), DimensionError);
}

TEST_CASE("gradient through a 2-layer stack matches finite differences") {
    Rng rng(5);
    auto p1 = TransformerLayerParams::init(4, 2, rng);
    auto p2 = TransformerLayerParams::init(4, 2, rng);
    Tensor z = random_tensor(rng, {3, 4}, true);
    Tensor w = random_tensor(rng, {3, 4});

    std::vector<Tensor> leaves = {z};
    for (auto* p : {&p1, &p2}) {
        for (auto& [name, t] : p->named("layer")) leaves.push_back(t);
    }
    auto rep = grad_check(
        [&] { return sum(mul(transformer_layer(transformer_layer(z, p1), p2), w)); }, leaves,
        1e-5, 1e-4);
    CHECK_MESSAGE(rep.pass, rep.summary());
}

TEST_CASE("cross-attention with a single key yields identical rows on a zero query stream") {
    Rng rng(6);
    auto p = TransformerLayerParams::init(8, 2, rng);
    Tensor x({4, 8}, 0.0);
    Tensor y = random_tensor(rng, {1, 8});
    Tensor out = cross_transformer(x, y, p);
    REQUIRE(out.rows() == 4);
    for (size_t i = 1; i < 4; ++i) {
        for (size_t j = 0; j < 8; ++j) {
            CHECK(out.value_at(i * 8 + j) == doctest::Approx(out.value_at(j)).epsilon(1e-12));
        }
    }
}

TEST_CASE("cross-attention is invariant to key/value permutations") {
    Rng rng(7);
    auto p = TransformerLayerParams::init(12, 4, rng);
    Tensor x = random_tensor(rng, {3, 12});
    Tensor y = random_tensor(rng, {6, 12});
    std::vector<size_t> perm = {5, 2, 0, 4, 1, 3};
    Tensor a = cross_transformer(x, y, p);
    Tensor b = cross_transformer(x, permute_rows(y, perm), p);
    for (size_t i = 0; i < a.numel(); ++i) {
        CHECK(a.value_at(i) == doctest::Approx(b.value_at(i)).epsilon(1e-12));
    }
}

TEST_CASE("cross-attention output follows the query stream's shape") {
    Rng rng(8);
    auto p = TransformerLayerParams::init(8, 4, rng);
    Tensor x = random_tensor(rng, {7, 8});
    Tensor y = random_tensor(rng, {2, 8});
    CHECK(cross_transformer(x, y, p).shape() == Shape{7, 8});
}

TEST_CASE("cross-attention gradients w.r.t. both streams match finite differences") {
    Rng rng(9);
    auto p = TransformerLayerParams::init(4, 2, rng);
    Tensor x = random_tensor(rng, {2, 4}, true);
    Tensor y = random_tensor(rng, {3, 4}, true);
    Tensor w = random_tensor(rng, {2, 4});
    std::vector<Tensor> leaves = {x, y};
    for (auto& [name, t] : p.named("layer")) leaves.push_back(t);
    auto rep = grad_check([&] { return sum(mul(cross_transformer(x, y, p), w)); }, leaves);
    CHECK_MESSAGE(rep.pass, rep.summary());
}

TEST_CASE("attention weight rows sum to one") {
    // Reconstructed from softmax directly: the layer internals use
    // softmax_rows, whose row sums are checked here at attention scale.
    Rng rng(10);
    Tensor scores = random_tensor(rng, {6, 9});
    Tensor s = softmax_rows(scores);
    for (size_t i = 0; i < 6; ++i) {
        double total = 0.0;
        for (size_t j = 0; j < 9; ++j) total += s.value_at(i * 9 + j);
        CHECK(std::fabs(total - 1.0) < 1e-9);
    }
}
