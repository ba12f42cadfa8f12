#include "msbt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msbt/error.hpp"
#include "msbt/kernels.hpp"

namespace msbt {
namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

bool any_requires_grad(const std::vector<Tensor>& ts) {
    for (const auto& t : ts) {
        if (t.requires_grad()) return true;
    }
    return false;
}

template <typename F>
Tensor make_op(Shape shape, std::vector<double> data,
               const std::vector<Tensor>& parents, F&& backward) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = any_requires_grad(parents);
    if (n->requires_grad) {
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->backward_fn = std::forward<F>(backward);
    }
    return Tensor::from_node(n);
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.shape().size() != 2) {
        throw DimensionError(std::string(op) + ": expected rank-2 tensor, got shape " +
                             shape_str(t.shape()));
    }
}

// ---------------------------------------------------------------------------
// Broadcasting machinery (right-aligned; dims equal or 1).

struct BroadcastPlan {
    Shape out;
    std::vector<size_t> sa;  // strides into a per out dim (0 where broadcast)
    std::vector<size_t> sb;
    bool same_shape;
    bool row_bcast_b;   // [m x n] OP [n]-shaped b (bias adds)
    bool scalar_b;      // b has a single element
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
    const size_t ra = a.size(), rb = b.size(), r = std::max(ra, rb);
    BroadcastPlan p;
    p.out.resize(r);
    p.sa.assign(r, 0);
    p.sb.assign(r, 0);
    std::vector<size_t> fa(r, 1), fb(r, 1);
    for (size_t i = 0; i < ra; ++i) fa[r - ra + i] = a[i];
    for (size_t i = 0; i < rb; ++i) fb[r - rb + i] = b[i];
    for (size_t i = 0; i < r; ++i) {
        if (fa[i] == fb[i] || fa[i] == 1 || fb[i] == 1) {
            p.out[i] = std::max(fa[i], fb[i]);
        } else {
            throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                                 shape_str(b) + " are not broadcast-compatible");
        }
    }
    // Row-major strides, zeroed on broadcast dims.
    size_t stra = 1, strb = 1;
    for (size_t i = r; i-- > 0;) {
        p.sa[i] = (fa[i] == 1) ? 0 : stra;
        p.sb[i] = (fb[i] == 1) ? 0 : strb;
        stra *= fa[i];
        strb *= fb[i];
    }
    p.same_shape = (a == b);
    p.scalar_b = numel_of(b) == 1;
    p.row_bcast_b = !p.scalar_b && a.size() == 2 && numel_of(b) == a[1] &&
                    (rb == 1 || (rb == 2 && b[0] == 1));
    return p;
}

// Walks every output index of `plan`, calling f(out_linear, a_linear, b_linear).
template <typename F>
void for_broadcast(const BroadcastPlan& p, F&& f) {
    const size_t r = p.out.size();
    const size_t total = numel_of(p.out);
    std::vector<size_t> idx(r, 0);
    size_t ia = 0, ib = 0;
    for (size_t lin = 0; lin < total; ++lin) {
        f(lin, ia, ib);
        for (size_t d = r; d-- > 0;) {
            if (++idx[d] < p.out[d]) {
                ia += p.sa[d];
                ib += p.sb[d];
                break;
            }
            idx[d] = 0;
            ia -= p.sa[d] * (p.out[d] - 1);
            ib -= p.sb[d] * (p.out[d] - 1);
        }
    }
}

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary_broadcast(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
    const auto plan = plan_broadcast(a.shape(), b.shape(), name);
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(numel_of(plan.out));
    const auto& k = kernels::active();
    // Bias adds and scalar-tensor products dominate the op mix; route them
    // through the kernels instead of the generic strided walk.
    const bool fast = (op == BinOp::Add || op == BinOp::Mul) &&
                      (plan.same_shape || plan.scalar_b || plan.row_bcast_b);

    if (fast) {
        if (plan.same_shape) {
            if (op == BinOp::Add) {
                k.add(av.data(), bv.data(), out.data(), out.size());
            } else {
                k.mul(av.data(), bv.data(), out.data(), out.size());
            }
        } else if (plan.scalar_b) {
            const double c = bv[0];
            if (op == BinOp::Add) {
                for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
            } else {
                k.scale(c, av.data(), out.data(), out.size());
            }
        } else {  // row broadcast
            const size_t m = plan.out[0], n = plan.out[1];
            for (size_t i = 0; i < m; ++i) {
                if (op == BinOp::Add) {
                    k.add(av.data() + i * n, bv.data(), out.data() + i * n, n);
                } else {
                    k.mul(av.data() + i * n, bv.data(), out.data() + i * n, n);
                }
            }
        }
    } else if (plan.same_shape) {
        if (op == BinOp::Sub) {
            for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
        } else {
            for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
        }
    } else {
        for_broadcast(plan, [&](size_t o, size_t ia, size_t ib) {
            switch (op) {
                case BinOp::Add: out[o] = av[ia] + bv[ib]; break;
                case BinOp::Sub: out[o] = av[ia] - bv[ib]; break;
                case BinOp::Mul: out[o] = av[ia] * bv[ib]; break;
                case BinOp::Div: out[o] = av[ia] / bv[ib]; break;
            }
        });
    }

    NodePtr pa = a.node(), pb = b.node();
    return make_op(plan.out, std::move(out), {a, b}, [pa, pb, plan, op, fast](Node& n) {
        const auto& g = n.grad;
        const auto& kr = kernels::active();
        const bool wa = pa->requires_grad, wb = pb->requires_grad;
        if (wa) pa->ensure_grad();
        if (wb) pb->ensure_grad();

        if (fast) {
            if (plan.same_shape) {
                if (op == BinOp::Add) {
                    if (wa) kr.acc(g.data(), pa->grad.data(), g.size());
                    if (wb) kr.acc(g.data(), pb->grad.data(), g.size());
                } else {
                    if (wa) {
                        for (size_t i = 0; i < g.size(); ++i)
                            pa->grad[i] += g[i] * pb->data[i];
                    }
                    if (wb) {
                        for (size_t i = 0; i < g.size(); ++i)
                            pb->grad[i] += g[i] * pa->data[i];
                    }
                }
            } else if (plan.scalar_b) {
                if (op == BinOp::Add) {
                    if (wa) kr.acc(g.data(), pa->grad.data(), g.size());
                    if (wb) {
                        double s = 0.0;
                        for (double gi : g) s += gi;
                        pb->grad[0] += s;
                    }
                } else {
                    if (wa) kr.axpy(pb->data[0], g.data(), pa->grad.data(), g.size());
                    if (wb) {
                        double s = 0.0;
                        for (size_t i = 0; i < g.size(); ++i) s += g[i] * pa->data[i];
                        pb->grad[0] += s;
                    }
                }
            } else {  // row broadcast
                const size_t m = plan.out[0], nn = plan.out[1];
                if (op == BinOp::Add) {
                    if (wa) kr.acc(g.data(), pa->grad.data(), g.size());
                    if (wb) {
                        for (size_t i = 0; i < m; ++i)
                            kr.acc(g.data() + i * nn, pb->grad.data(), nn);
                    }
                } else {
                    if (wa) {
                        for (size_t i = 0; i < m; ++i)
                            for (size_t j = 0; j < nn; ++j)
                                pa->grad[i * nn + j] += g[i * nn + j] * pb->data[j];
                    }
                    if (wb) {
                        for (size_t i = 0; i < m; ++i)
                            for (size_t j = 0; j < nn; ++j)
                                pb->grad[j] += g[i * nn + j] * pa->data[i * nn + j];
                    }
                }
            }
            return;
        }

        switch (op) {
            case BinOp::Add:
                for_broadcast(plan, [&](size_t o, size_t ia, size_t ib) {
                    if (wa) pa->grad[ia] += g[o];
                    if (wb) pb->grad[ib] += g[o];
                });
                break;
            case BinOp::Sub:
                for_broadcast(plan, [&](size_t o, size_t ia, size_t ib) {
                    if (wa) pa->grad[ia] += g[o];
                    if (wb) pb->grad[ib] -= g[o];
                });
                break;
            case BinOp::Mul:
                for_broadcast(plan, [&](size_t o, size_t ia, size_t ib) {
                    if (wa) pa->grad[ia] += g[o] * pb->data[ib];
                    if (wb) pb->grad[ib] += g[o] * pa->data[ia];
                });
                break;
            case BinOp::Div:
                for_broadcast(plan, [&](size_t o, size_t ia, size_t ib) {
                    const double inv = 1.0 / pb->data[ib];
                    if (wa) pa->grad[ia] += g[o] * inv;
                    if (wb) pb->grad[ib] -= g[o] * pa->data[ia] * inv * inv;
                });
                break;
        }
    });
}

// Unary op: out_i = f(a_i), da_i += g_i * dfa(i).
template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd&& fwd, Bwd&& dfa) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    NodePtr pa = a.node();
    return make_op(a.shape(), std::move(out), {a}, [pa, dfa](Node& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            pa->grad[i] += n.grad[i] * dfa(pa->data[i], n.data[i]);
        }
    });
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix products

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    kernels::active().matmul_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
    NodePtr pa = a.node(), pb = b.node();
    return make_op({m, n}, std::move(out), {a, b}, [pa, pb, m, k, n](Node& node) {
        const auto& kr = kernels::active();
        if (pa->requires_grad) {
            pa->ensure_grad();  // dA += dC * B^T
            kr.matmul_nt(node.grad.data(), pb->data.data(), pa->grad.data(), m, n, k);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();  // dB += A^T * dC
            kr.matmul_tn(pa->data.data(), node.grad.data(), pb->grad.data(), k, m, n);
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_nt");
    require_rank2(b, "matmul_nt");
    const size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k) {
        throw DimensionError("matmul_nt: contraction dims disagree: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    kernels::active().matmul_nt(a.values().data(), b.values().data(), out.data(), m, k, n);
    NodePtr pa = a.node(), pb = b.node();
    return make_op({m, n}, std::move(out), {a, b}, [pa, pb, m, k, n](Node& node) {
        const auto& kr = kernels::active();
        if (pa->requires_grad) {
            pa->ensure_grad();  // dA += dC * B
            kr.matmul_nn(node.grad.data(), pb->data.data(), pa->grad.data(), m, n, k);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();  // dB += dC^T * A
            kr.matmul_tn(node.grad.data(), pa->data.data(), pb->grad.data(), n, m, k);
        }
    });
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) { return binary_broadcast(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_broadcast(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_broadcast(a, b, BinOp::Mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_broadcast(a, b, BinOp::Div, "div"); }

Tensor add_scalar(const Tensor& a, double c) {
    return unary_op(
        a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    kernels::active().scale(c, av.data(), out.data(), out.size());
    NodePtr pa = a.node();
    return make_op(a.shape(), std::move(out), {a}, [pa, c](Node& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        kernels::active().axpy(c, n.grad.data(), pa->grad.data(), n.grad.size());
    });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    for (double x : a.values()) {
        if (!(x > 0.0)) {
            throw DomainError("log: input must be positive, got " + std::to_string(x));
        }
    }
    return unary_op(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
        [](double x, double) {
            return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
                   x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
        });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (!(lo <= hi)) throw ContractError("clamp: lo > hi");
    return unary_op(
        a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double x : a.values()) s += x;
    NodePtr pa = a.node();
    return make_op({}, {s}, {a}, [pa](Node& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const double g = n.grad[0];
        for (double& d : pa->grad) d += g;
    });
}

Tensor mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.numel());
    double s = 0.0;
    for (double x : a.values()) s += x;
    NodePtr pa = a.node();
    return make_op({}, {s * inv}, {a}, [pa, inv](Node& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const double g = n.grad[0] * inv;
        for (double& d : pa->grad) d += g;
    });
}

Tensor sum_axis(const Tensor& a, int axis) {
    require_rank2(a, "sum_axis");
    if (axis != 0 && axis != 1) throw ContractError("sum_axis: axis must be 0 or 1");
    const size_t m = a.rows(), n = a.cols();
    const auto& av = a.values();
    Shape oshape = (axis == 0) ? Shape{1, n} : Shape{m, 1};
    std::vector<double> out(numel_of(oshape), 0.0);
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < n; ++j) {
            out[axis == 0 ? j : i] += av[i * n + j];
        }
    }
    NodePtr pa = a.node();
    return make_op(oshape, std::move(out), {a}, [pa, m, n, axis](Node& node) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < n; ++j) {
                pa->grad[i * n + j] += node.grad[axis == 0 ? j : i];
            }
        }
    });
}

Tensor mean_axis(const Tensor& a, int axis) {
    require_rank2(a, "mean_axis");
    const double inv = 1.0 / static_cast<double>(axis == 0 ? a.rows() : a.cols());
    return mul_scalar(sum_axis(a, axis), inv);
}

// ---------------------------------------------------------------------------
// Softmax / layernorm / logsumexp

Tensor softmax_rows(const Tensor& a) {
    require_rank2(a, "softmax_rows");
    const size_t m = a.rows(), n = a.cols();
    const auto& av = a.values();
    std::vector<double> out(m * n);
    for (size_t i = 0; i < m; ++i) {
        const double* row = av.data() + i * n;
        double* orow = out.data() + i * n;
        double mx = row[0];
        for (size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (size_t j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        const double inv = 1.0 / denom;
        for (size_t j = 0; j < n; ++j) orow[j] *= inv;
    }
    NodePtr pa = a.node();
    return make_op({m, n}, std::move(out), {a}, [pa, m, n](Node& node) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < m; ++i) {
            const double* s = node.data.data() + i * n;
            const double* g = node.grad.data() + i * n;
            double dot = 0.0;
            for (size_t j = 0; j < n; ++j) dot += g[j] * s[j];
            double* dst = pa->grad.data() + i * n;
            for (size_t j = 0; j < n; ++j) dst[j] += s[j] * (g[j] - dot);
        }
    });
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const auto& xs = x.shape();
    if (xs.empty()) throw DimensionError("layernorm: scalar input");
    if (!(eps > 0.0)) throw ContractError("layernorm: eps must be positive");
    const size_t d = xs.back();
    const size_t rows = x.numel() / d;
    if (gamma.numel() != d || beta.numel() != d) {
        throw DimensionError("layernorm: gamma/beta length " + std::to_string(gamma.numel()) +
                             "/" + std::to_string(beta.numel()) + " does not match feature dim " +
                             std::to_string(d));
    }
    const auto& xv = x.values();
    const auto& gv = gamma.values();
    const auto& bv = beta.values();
    std::vector<double> out(x.numel());
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_sigma(rows);
    for (size_t i = 0; i < rows; ++i) {
        const double* row = xv.data() + i * d;
        double mu = 0.0;
        for (size_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (size_t j = 0; j < d; ++j) {
            const double c = row[j] - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_sigma[i] = inv;
        for (size_t j = 0; j < d; ++j) {
            const double h = (row[j] - mu) * inv;
            xhat[i * d + j] = h;
            out[i * d + j] = gv[j] * h + bv[j];
        }
    }
    NodePtr px = x.node(), pg = gamma.node(), pb = beta.node();
    return make_op(xs, std::move(out), {x, gamma, beta},
                   [px, pg, pb, rows, d, xhat = std::move(xhat),
                    inv_sigma = std::move(inv_sigma)](Node& node) {
        const auto& g = node.grad;
        if (pg->requires_grad) {
            pg->ensure_grad();
            for (size_t i = 0; i < rows; ++i)
                for (size_t j = 0; j < d; ++j) pg->grad[j] += g[i * d + j] * xhat[i * d + j];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < rows; ++i)
                for (size_t j = 0; j < d; ++j) pb->grad[j] += g[i * d + j];
        }
        if (px->requires_grad) {
            px->ensure_grad();
            std::vector<double> h(d);
            for (size_t i = 0; i < rows; ++i) {
                double mh = 0.0, mhx = 0.0;
                for (size_t j = 0; j < d; ++j) {
                    h[j] = g[i * d + j] * pg->data[j];
                    mh += h[j];
                    mhx += h[j] * xhat[i * d + j];
                }
                mh /= static_cast<double>(d);
                mhx /= static_cast<double>(d);
                const double inv = inv_sigma[i];
                for (size_t j = 0; j < d; ++j) {
                    px->grad[i * d + j] += inv * (h[j] - mh - xhat[i * d + j] * mhx);
                }
            }
        }
    });
}

Tensor logsumexp_rows(const Tensor& a) {
    require_rank2(a, "logsumexp_rows");
    const size_t m = a.rows(), n = a.cols();
    const auto& av = a.values();
    std::vector<double> out(m);
    for (size_t i = 0; i < m; ++i) {
        const double* row = av.data() + i * n;
        double mx = row[0];
        for (size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
        out[i] = mx + std::log(s);
    }
    NodePtr pa = a.node();
    return make_op({m}, std::move(out), {a}, [pa, m, n](Node& node) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < m; ++i) {
            const double gi = node.grad[i];
            const double lse = node.data[i];
            for (size_t j = 0; j < n; ++j) {
                pa->grad[i * n + j] += gi * std::exp(pa->data[i * n + j] - lse);
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Structure ops

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    if (axis != 0 && axis != 1) throw ContractError("concat: axis must be 0 or 1");
    for (const auto& p : parts) require_rank2(p, "concat");
    const size_t other = (axis == 0) ? parts[0].cols() : parts[0].rows();
    size_t along = 0;
    for (const auto& p : parts) {
        const size_t po = (axis == 0) ? p.cols() : p.rows();
        if (po != other) {
            throw DimensionError("concat: mismatched shapes " + shape_str(parts[0].shape()) +
                                 " vs " + shape_str(p.shape()));
        }
        along += (axis == 0) ? p.rows() : p.cols();
    }
    const size_t m = (axis == 0) ? along : other;
    const size_t n = (axis == 0) ? other : along;
    std::vector<double> out(m * n);
    size_t off = 0;
    for (const auto& p : parts) {
        const auto& pv = p.values();
        if (axis == 0) {
            std::copy(pv.begin(), pv.end(), out.begin() + off * n);
            off += p.rows();
        } else {
            const size_t pc = p.cols();
            for (size_t i = 0; i < m; ++i) {
                std::copy(pv.begin() + i * pc, pv.begin() + (i + 1) * pc,
                          out.begin() + i * n + off);
            }
            off += pc;
        }
    }
    std::vector<NodePtr> pnodes;
    pnodes.reserve(parts.size());
    for (const auto& p : parts) pnodes.push_back(p.node());
    return make_op({m, n}, std::move(out), parts, [pnodes, axis, m, n](Node& node) {
        size_t off = 0;
        for (const auto& p : pnodes) {
            const size_t pm = p->shape[0], pn = p->shape[1];
            if (p->requires_grad) {
                p->ensure_grad();
                if (axis == 0) {
                    for (size_t i = 0; i < pm * pn; ++i) p->grad[i] += node.grad[off * n + i];
                } else {
                    for (size_t i = 0; i < m; ++i)
                        for (size_t j = 0; j < pn; ++j)
                            p->grad[i * pn + j] += node.grad[i * n + off + j];
                }
            }
            off += (axis == 0) ? pm : pn;
        }
    });
}

Tensor slice(const Tensor& a, int axis, size_t start, size_t len) {
    require_rank2(a, "slice");
    if (axis != 0 && axis != 1) throw ContractError("slice: axis must be 0 or 1");
    const size_t m = a.rows(), n = a.cols();
    const size_t dim = (axis == 0) ? m : n;
    if (len == 0 || start + len > dim) {
        throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                             std::to_string(start + len) + ") exceeds dim " + std::to_string(dim));
    }
    const auto& av = a.values();
    Shape oshape = (axis == 0) ? Shape{len, n} : Shape{m, len};
    std::vector<double> out(numel_of(oshape));
    if (axis == 0) {
        std::copy(av.begin() + start * n, av.begin() + (start + len) * n, out.begin());
    } else {
        for (size_t i = 0; i < m; ++i) {
            std::copy(av.begin() + i * n + start, av.begin() + i * n + start + len,
                      out.begin() + i * len);
        }
    }
    NodePtr pa = a.node();
    return make_op(oshape, std::move(out), {a}, [pa, axis, start, len, m, n](Node& node) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        if (axis == 0) {
            for (size_t i = 0; i < len * n; ++i) pa->grad[start * n + i] += node.grad[i];
        } else {
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < len; ++j)
                    pa->grad[i * n + start + j] += node.grad[i * len + j];
        }
    });
}

std::vector<Tensor> split(const Tensor& a, int axis, const std::vector<size_t>& sizes) {
    require_rank2(a, "split");
    const size_t dim = (axis == 0) ? a.rows() : a.cols();
    const size_t total = std::accumulate(sizes.begin(), sizes.end(), size_t{0});
    if (total != dim) {
        throw DimensionError("split: sizes sum to " + std::to_string(total) +
                             " but axis dim is " + std::to_string(dim));
    }
    std::vector<Tensor> out;
    out.reserve(sizes.size());
    size_t off = 0;
    for (size_t s : sizes) {
        out.push_back(slice(a, axis, off, s));
        off += s;
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const size_t m = a.rows(), n = a.cols();
    const auto& av = a.values();
    std::vector<double> out(m * n);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
    NodePtr pa = a.node();
    return make_op({n, m}, std::move(out), {a}, [pa, m, n](Node& node) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) pa->grad[i * n + j] += node.grad[j * m + i];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel_of(shape) != a.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                             shape_str(shape));
    }
    NodePtr pa = a.node();
    return make_op(std::move(shape), a.values(), {a}, [pa](Node& node) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        kernels::active().acc(node.grad.data(), pa->grad.data(), node.grad.size());
    });
}

Tensor diag(const Tensor& a) {
    require_rank2(a, "diag");
    const size_t m = a.rows();
    if (a.cols() != m) throw DimensionError("diag: matrix not square: " + shape_str(a.shape()));
    std::vector<double> out(m);
    for (size_t i = 0; i < m; ++i) out[i] = a.values()[i * m + i];
    NodePtr pa = a.node();
    return make_op({m}, std::move(out), {a}, [pa, m](Node& node) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < m; ++i) pa->grad[i * m + i] += node.grad[i];
    });
}

Tensor topk_mean(const Tensor& a, size_t k) {
    if (a.shape().size() != 1) {
        throw DimensionError("topk_mean: expected rank-1 tensor, got " + shape_str(a.shape()));
    }
    const size_t t = a.numel();
    if (k == 0 || k > t) {
        throw ContractError("topk_mean: k=" + std::to_string(k) + " out of range for length " +
                            std::to_string(t));
    }
    const auto& av = a.values();
    std::vector<size_t> idx(t);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) {
        if (av[i] != av[j]) return av[i] > av[j];
        return i < j;
    });
    idx.resize(k);
    double s = 0.0;
    for (size_t i : idx) s += av[i];
    const double invk = 1.0 / static_cast<double>(k);
    NodePtr pa = a.node();
    return make_op({}, {s * invk}, {a}, [pa, idx = std::move(idx), invk](Node& node) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const double g = node.grad[0] * invk;
        for (size_t i : idx) pa->grad[i] += g;
    });
}

// ---------------------------------------------------------------------------
// Cosine similarity

Tensor cosine_matrix(const Tensor& u, const Tensor& v, double eps) {
    require_rank2(u, "cosine_matrix");
    require_rank2(v, "cosine_matrix");
    const size_t m = u.rows(), n = v.rows(), d = u.cols();
    if (v.cols() != d) {
        throw DimensionError("cosine_matrix: feature dims disagree: " + shape_str(u.shape()) +
                             " vs " + shape_str(v.shape()));
    }
    if (!(eps > 0.0)) throw ContractError("cosine_matrix: eps must be positive");
    const auto& uv = u.values();
    const auto& vv = v.values();
    // mask marks rows whose true norm won (eps guard inactive); the
    // norm-direction gradient term exists only there.
    auto guarded_norms = [eps](const std::vector<double>& x, size_t rows, size_t dd,
                               std::vector<char>& mask) {
        std::vector<double> out(rows);
        mask.resize(rows);
        for (size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            for (size_t j = 0; j < dd; ++j) s += x[i * dd + j] * x[i * dd + j];
            const double norm = std::sqrt(s);
            mask[i] = norm >= eps;
            out[i] = std::max(norm, eps);
        }
        return out;
    };
    std::vector<char> mu_mask, mv_mask;
    std::vector<double> nu = guarded_norms(uv, m, d, mu_mask);
    std::vector<double> nv = guarded_norms(vv, n, d, mv_mask);

    std::vector<double> dots(m * n, 0.0);
    kernels::active().matmul_nt(uv.data(), vv.data(), dots.data(), m, d, n);
    std::vector<double> out(m * n);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out[i * n + j] = dots[i * n + j] / (nu[i] * nv[j]);

    NodePtr pu = u.node(), pv = v.node();
    return make_op({m, n}, std::move(out), {u, v},
                   [pu, pv, m, n, d, nu = std::move(nu), nv = std::move(nv),
                    mu_mask = std::move(mu_mask), mv_mask = std::move(mv_mask)](Node& node) {
        const auto& kr = kernels::active();
        const auto& g = node.grad;
        const auto& s = node.data;
        // W[i][j] = g[i][j] / (nu_i * nv_j); dot-direction terms are W*V and W^T*U.
        std::vector<double> w(m * n);
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) w[i * n + j] = g[i * n + j] / (nu[i] * nv[j]);
        if (pu->requires_grad) {
            pu->ensure_grad();
            kr.matmul_nn(w.data(), pv->data.data(), pu->grad.data(), m, n, d);
            for (size_t i = 0; i < m; ++i) {
                if (!mu_mask[i]) continue;
                double coef = 0.0;
                for (size_t j = 0; j < n; ++j) coef += g[i * n + j] * s[i * n + j];
                coef /= nu[i] * nu[i];
                for (size_t j = 0; j < d; ++j) pu->grad[i * d + j] -= coef * pu->data[i * d + j];
            }
        }
        if (pv->requires_grad) {
            pv->ensure_grad();
            kr.matmul_tn(w.data(), pu->data.data(), pv->grad.data(), n, m, d);
            for (size_t j = 0; j < n; ++j) {
                if (!mv_mask[j]) continue;
                double coef = 0.0;
                for (size_t i = 0; i < m; ++i) coef += g[i * n + j] * s[i * n + j];
                coef /= nv[j] * nv[j];
                for (size_t i2 = 0; i2 < d; ++i2)
                    pv->grad[j * d + i2] -= coef * pv->data[j * d + i2];
            }
        }
    });
}

Tensor cosine_similarity(const Tensor& u, const Tensor& v, double eps) {
    if (u.shape().size() != 1 || v.shape().size() != 1) {
        throw DimensionError("cosine_similarity: expected rank-1 tensors, got " +
                             shape_str(u.shape()) + " and " + shape_str(v.shape()));
    }
    if (u.numel() != v.numel()) {
        throw DimensionError("cosine_similarity: lengths disagree: " + shape_str(u.shape()) +
                             " vs " + shape_str(v.shape()));
    }
    const size_t d = u.numel();
    Tensor s = cosine_matrix(reshape(u, {1, d}), reshape(v, {1, d}), eps);
    return reshape(s, {});
}

}  // namespace msbt
