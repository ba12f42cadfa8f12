#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "msbt/error.hpp"
#include "msbt/gradcheck.hpp"
#include "msbt/ops.hpp"
#include "msbt/rng.hpp"

using namespace msbt;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, bool requires_grad = true,
                     double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(numel_of(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

}  // namespace

// ---------------------------------------------------------------------------
// matmul

TEST_CASE("matmul: identity and hand-computed product") {
    Tensor eye({2, 2}, {1.0, 0.0, 0.0, 1.0});
    Tensor a({2, 2}, {3.0, -1.0, 2.5, 7.0});
    CHECK(matmul(eye, a).values() == a.values());

    Tensor b({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor c({2, 1}, {0.0, 1.0});
    Tensor r = matmul(b, c);
    CHECK(r.shape() == Shape{2, 1});
    CHECK(r.values() == std::vector<double>{2.0, 4.0});
}

TEST_CASE("matmul: shape mismatch names both shapes") {
    Tensor a({2, 3}, 1.0);
    Tensor b({4, 5}, 1.0);
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x5]") != std::string::npos);
    }
}

TEST_CASE("matmul gradients match finite differences") {
    Rng rng(11);
    Tensor a = random_tensor(rng, {3, 4});
    Tensor b = random_tensor(rng, {4, 2});
    auto rep = grad_check([&] { return sum(matmul(a, b)); }, {a, b});
    CHECK_MESSAGE(rep.pass, rep.summary());
}

TEST_CASE("matmul_nt equals matmul with explicit transpose and its grads check out") {
    Rng rng(12);
    Tensor a = random_tensor(rng, {3, 5});
    Tensor b = random_tensor(rng, {4, 5});
    Tensor direct = matmul_nt(a, b);
    Tensor viaT = matmul(a, transpose(b));
    REQUIRE(direct.shape() == viaT.shape());
    for (size_t i = 0; i < direct.numel(); ++i) {
        CHECK(direct.value_at(i) == doctest::Approx(viaT.value_at(i)).epsilon(1e-13));
    }
    auto rep = grad_check([&] { return sum(mul(matmul_nt(a, b), matmul_nt(a, b))); }, {a, b});
    CHECK_MESSAGE(rep.pass, rep.summary());
}

// ---------------------------------------------------------------------------
// softmax

TEST_CASE("softmax_rows: uniform row, stability, row-sum invariant") {
    Tensor x({2, 3}, {0.0, 0.0, 0.0, 1000.0, 0.0, -4.0});
    Tensor s = softmax_rows(x);
    for (size_t j = 0; j < 3; ++j) CHECK(s.value_at(j) == doctest::Approx(1.0 / 3.0));
    CHECK(s.value_at(3) == doctest::Approx(1.0));
    CHECK(s.value_at(4) == doctest::Approx(0.0));
    for (double v : s.values()) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    Rng rng(3);
    Tensor r = softmax_rows(random_tensor(rng, {5, 7}, false, -3.0, 3.0));
    for (size_t i = 0; i < 5; ++i) {
        double rowsum = 0.0;
        for (size_t j = 0; j < 7; ++j) rowsum += r.value_at(i * 7 + j);
        CHECK(std::fabs(rowsum - 1.0) < 1e-9);
    }
}

TEST_CASE("softmax_rows gradient matches finite differences") {
    Rng rng(13);
    Tensor x = random_tensor(rng, {3, 4});
    Tensor w = random_tensor(rng, {3, 4}, false);  // weighting makes the loss non-constant
    auto rep = grad_check([&] { return sum(mul(softmax_rows(x), w)); }, {x});
    CHECK_MESSAGE(rep.pass, rep.summary());
}

TEST_CASE("softmax-then-sum is constant so the gradient is exactly zero") {
    Rng rng(14);
    Tensor x = random_tensor(rng, {2, 5});
    auto rep = grad_check([&] { return sum(softmax_rows(x)); }, {x});
    CHECK(rep.max_rel_err < 1e-9);
}

// ---------------------------------------------------------------------------
// layernorm

TEST_CASE("layernorm: constant vector maps to zeros via eps") {
    Tensor x({1, 4}, {2.5, 2.5, 2.5, 2.5});
    Tensor gamma({4}, 1.0);
    Tensor beta({4}, 0.0);
    Tensor y = layernorm(x, gamma, beta);
    for (double v : y.values()) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("layernorm: two-point standardization") {
    Tensor x({1, 2}, {1.0, 3.0});
    Tensor gamma({2}, 1.0);
    Tensor beta({2}, 0.0);
    Tensor y = layernorm(x, gamma, beta);
    CHECK(y.value_at(0) == doctest::Approx(-1.0).epsilon(1e-3));
    CHECK(y.value_at(1) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("layernorm normalizes mean and variance before the affine") {
    Rng rng(15);
    Tensor x = random_tensor(rng, {6, 16}, false, -4.0, 4.0);
    Tensor gamma({16}, 1.0);
    Tensor beta({16}, 0.0);
    Tensor y = layernorm(x, gamma, beta);
    for (size_t i = 0; i < 6; ++i) {
        double mu = 0.0, var = 0.0;
        for (size_t j = 0; j < 16; ++j) mu += y.value_at(i * 16 + j);
        mu /= 16.0;
        for (size_t j = 0; j < 16; ++j) {
            const double c = y.value_at(i * 16 + j) - mu;
            var += c * c;
        }
        var /= 16.0;
        CHECK(std::fabs(mu) < 1e-9);
        CHECK(std::fabs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("layernorm gradients w.r.t. x, gamma, beta match finite differences") {
    Rng rng(16);
    Tensor x = random_tensor(rng, {3, 6});
    Tensor gamma = random_tensor(rng, {6}, true, 0.5, 1.5);
    Tensor beta = random_tensor(rng, {6});
    Tensor w = random_tensor(rng, {3, 6}, false);
    auto rep = grad_check([&] { return sum(mul(layernorm(x, gamma, beta), w)); },
                          {x, gamma, beta});
    CHECK_MESSAGE(rep.pass, rep.summary());
}

// ---------------------------------------------------------------------------
// elementwise suite

TEST_CASE("split is the exact inverse of concat") {
    Rng rng(17);
    Tensor a = random_tensor(rng, {2, 3}, false);
    Tensor b = random_tensor(rng, {4, 3}, false);
    Tensor cat = concat({a, b}, 0);
    auto back = split(cat, 0, {2, 4});
    CHECK(back[0].values() == a.values());
    CHECK(back[1].values() == b.values());

    Tensor cat1 = concat({transpose(a), transpose(b)}, 1);
    auto back1 = split(cat1, 1, {2, 4});
    CHECK(back1[0].values() == transpose(a).values());
    CHECK(back1[1].values() == transpose(b).values());
}

TEST_CASE("relu forward and zero subgradient at the kink") {
    Tensor x({3}, {-1.0, 0.0, 2.0}, true);
    Tensor y = relu(x);
    CHECK(y.values() == std::vector<double>{0.0, 0.0, 2.0});
    sum(y).backward();
    CHECK(x.grad() == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("log rejects nonpositive input") {
    Tensor x({2}, {1.0, -0.5});
    CHECK_THROWS_AS(log(x), DomainError);
    Tensor z({1}, {0.0});
    CHECK_THROWS_AS(log(z), DomainError);
}

TEST_CASE("broadcast add/mul: row vector, column vector, scalar") {
    Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor row({3}, {10, 20, 30});
    Tensor col({2, 1}, {100, 200});
    Tensor s({}, {7});
    CHECK(add(m, row).values() == std::vector<double>{11, 22, 33, 14, 25, 36});
    CHECK(add(m, col).values() == std::vector<double>{101, 102, 103, 204, 205, 206});
    CHECK(mul(m, s).values() == std::vector<double>{7, 14, 21, 28, 35, 42});
    CHECK_THROWS_AS(add(m, Tensor({4}, 1.0)), DimensionError);
}

TEST_CASE("every elementwise op's gradient matches finite differences") {
    Rng rng(18);
    Tensor x = random_tensor(rng, {2, 4});
    Tensor y = random_tensor(rng, {2, 4});
    Tensor row = random_tensor(rng, {4});
    Tensor pos = random_tensor(rng, {2, 4}, true, 0.2, 2.0);
    Tensor w = random_tensor(rng, {2, 4}, false);

    auto check = [&](const char* name, std::function<Tensor()> f, std::vector<Tensor> leaves) {
        auto rep = grad_check(std::move(f), std::move(leaves));
        CHECK_MESSAGE(rep.pass, name, ": ", rep.summary());
    };

    Tensor w_row = random_tensor(rng, {1, 4}, false);
    Tensor w_col = random_tensor(rng, {2, 1}, false);
    Tensor w_resh = random_tensor(rng, {4, 2}, false);
    Tensor w_cat0 = random_tensor(rng, {4, 4}, false);
    Tensor w_cat1 = random_tensor(rng, {2, 8}, false);
    Tensor w_slice = random_tensor(rng, {2, 2}, false);
    Tensor w_lse = random_tensor(rng, {2}, false);

    check("add", [&] { return sum(mul(add(x, y), w)); }, {x, y});
    check("add.broadcast", [&] { return sum(mul(add(x, row), w)); }, {x, row});
    check("sub", [&] { return sum(mul(sub(x, y), w)); }, {x, y});
    check("mul", [&] { return sum(mul(mul(x, y), w)); }, {x, y});
    check("mul.broadcast", [&] { return sum(mul(mul(x, row), w)); }, {x, row});
    check("div", [&] { return sum(mul(div(x, pos), w)); }, {x, pos});
    check("exp", [&] { return sum(mul(exp(x), w)); }, {x});
    check("log", [&] { return sum(mul(log(pos), w)); }, {pos});
    check("gelu", [&] { return sum(mul(gelu(x), w)); }, {x});
    check("sigmoid", [&] { return sum(mul(sigmoid(x), w)); }, {x});
    check("mul_scalar", [&] { return sum(mul(mul_scalar(x, -1.7), w)); }, {x});
    check("add_scalar", [&] { return sum(mul(add_scalar(x, 0.3), w)); }, {x});
    check("mean", [&] { return mean(mul(x, w)); }, {x});
    check("sum_axis0", [&] { return sum(mul(sum_axis(x, 0), w_row)); }, {x});
    check("sum_axis1", [&] { return sum(mul(sum_axis(x, 1), w_col)); }, {x});
    check("mean_axis0", [&] { return sum(mul(mean_axis(x, 0), w_row)); }, {x});
    check("transpose", [&] { return sum(mul(transpose(x), transpose(w))); }, {x});
    check("reshape", [&] { return sum(mul(reshape(x, {4, 2}), w_resh)); }, {x});
    check("concat0", [&] { return sum(mul(concat({x, y}, 0), w_cat0)); }, {x, y});
    check("concat1", [&] { return sum(mul(concat({x, y}, 1), w_cat1)); }, {x, y});
    check("slice", [&] { return sum(mul(slice(x, 1, 1, 2), w_slice)); }, {x});
    check("logsumexp", [&] { return sum(mul(logsumexp_rows(x), w_lse)); }, {x});
    check("clamp", [&] { return sum(mul(clamp(x, -0.5, 0.5), w)); }, {x});
}

TEST_CASE("relu gradient matches finite differences away from the kink") {
    // Keep inputs away from 0 so central differences see a smooth function.
    Rng rng(19);
    std::vector<double> vals(8);
    for (auto& v : vals) {
        v = rng.uniform(0.1, 1.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    }
    Tensor x({8}, vals, true);
    Tensor w = random_tensor(rng, {8}, false);
    auto rep = grad_check([&] { return sum(mul(relu(x), w)); }, {x});
    CHECK_MESSAGE(rep.pass, rep.summary());
}

// ---------------------------------------------------------------------------
// reductions and selections

TEST_CASE("topk_mean selects deterministically and routes gradient") {
    Tensor x({5}, {0.5, 0.9, 0.1, 0.9, 0.3}, true);
    Tensor m = topk_mean(x, 2);
    CHECK(m.scalar() == doctest::Approx(0.9));
    m.backward();
    // Ties break toward the lower index: elements 1 and 3.
    CHECK(x.grad() == std::vector<double>{0.0, 0.5, 0.0, 0.5, 0.0});
    CHECK_THROWS_AS(topk_mean(x, 6), ContractError);
    CHECK_THROWS_AS(topk_mean(x, 0), ContractError);
}

TEST_CASE("diag extracts the main diagonal with gradient") {
    Tensor x({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}, true);
    Tensor d = diag(x);
    CHECK(d.values() == std::vector<double>{1, 5, 9});
    sum(d).backward();
    CHECK(x.grad() == std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
}

// ---------------------------------------------------------------------------
// cosine similarity

TEST_CASE("cosine similarity: self is 1, orthogonal is 0, range is [-1,1]") {
    Tensor u({3}, {0.3, -0.7, 1.1});
    CHECK(cosine_similarity(u, u).scalar() == doctest::Approx(1.0));
    Tensor e1({2}, {1.0, 0.0});
    Tensor e2({2}, {0.0, 1.0});
    CHECK(cosine_similarity(e1, e2).scalar() == doctest::Approx(0.0));

    Rng rng(20);
    for (int i = 0; i < 20; ++i) {
        Tensor a = random_tensor(rng, {6}, false);
        Tensor b = random_tensor(rng, {6}, false);
        const double c = cosine_similarity(a, b).scalar();
        CHECK(c >= -1.0 - 1e-12);
        CHECK(c <= 1.0 + 1e-12);
    }
}

TEST_CASE("cosine similarity gradient matches finite differences") {
    Rng rng(21);
    Tensor u = random_tensor(rng, {5});
    Tensor v = random_tensor(rng, {5});
    auto rep = grad_check([&] { return cosine_similarity(u, v); }, {u, v});
    CHECK_MESSAGE(rep.pass, rep.summary());
}

TEST_CASE("cosine_matrix matches pairwise scalar cosine and its grads check out") {
    Rng rng(22);
    Tensor u = random_tensor(rng, {3, 4});
    Tensor v = random_tensor(rng, {2, 4});
    Tensor s = cosine_matrix(u, v);
    REQUIRE(s.shape() == Shape{3, 2});
    for (size_t i = 0; i < 3; ++i) {
        for (size_t j = 0; j < 2; ++j) {
            Tensor ui = slice(u, 0, i, 1);
            Tensor vj = slice(v, 0, j, 1);
            const double ref = cosine_similarity(reshape(ui, {4}), reshape(vj, {4})).scalar();
            CHECK(s.value_at(i * 2 + j) == doctest::Approx(ref).epsilon(1e-12));
        }
    }
    Tensor w = random_tensor(rng, {3, 2}, false);
    auto rep = grad_check([&] { return sum(mul(cosine_matrix(u, v), w)); }, {u, v});
    CHECK_MESSAGE(rep.pass, rep.summary());
}

TEST_CASE("cosine_matrix eps guard keeps zero vectors finite") {
    Tensor u({1, 3}, {0.0, 0.0, 0.0});
    Tensor v({1, 3}, {1.0, 2.0, 2.0});
    Tensor s = cosine_matrix(u, v);
    CHECK(s.value_at(0) == 0.0);
}

// ---------------------------------------------------------------------------
// grad_check itself

TEST_CASE("grad_check on f=sum reports (near) zero error") {
    Rng rng(23);
    Tensor x = random_tensor(rng, {3, 3});
    auto rep = grad_check([&] { return sum(x); }, {x});
    CHECK(rep.max_rel_err < 1e-9);
    CHECK(rep.pass);
}

TEST_CASE("grad_check flags a wrong gradient") {
    // relu backward at large positive inputs is 1; a function whose analytic
    // grad is deliberately broken: use mul with a detached copy pretending to
    // be constant. Simplest honest check: compare sum(2x) against leaves of x
    // only through a wrong closure is impossible here, so instead check that
    // an obviously nonlinear f with large step fails tolerance.
    Rng rng(24);
    Tensor x = random_tensor(rng, {4});
    auto rep = grad_check([&] { return sum(mul(mul(x, x), mul(x, x))); }, {x}, 0.3, 1e-6);
    CHECK_FALSE(rep.pass);  // O(step^2) truncation error at step=0.3 blows the tol
}
