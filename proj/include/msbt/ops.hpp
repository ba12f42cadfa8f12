#pragma once

#include <vector>

#include "msbt/tensor.hpp"

namespace msbt {

// Differentiable operations. All execute eagerly and record the backward
// closure on the output node when any input requires grad. Rank conventions:
// matrices are rank-2 row-major, vectors rank-1, scalars rank-0 (shape {}).

// c = a[m x k] * b[k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// c = a[m x k] * b[n x k]^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// Elementwise with right-aligned broadcasting (dims equal or 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // DomainError on nonpositive input
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor sigmoid(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar
// Rank-2 reductions, keepdim: axis 0 -> [1 x n], axis 1 -> [m x 1].
Tensor sum_axis(const Tensor& a, int axis);
Tensor mean_axis(const Tensor& a, int axis);

// Rows sum to 1; computed with max-subtraction.
Tensor softmax_rows(const Tensor& a);

// Normalizes each row of x (rank-1 treated as one row) to mean 0 / var 1
// before the affine gamma/beta. gamma and beta have numel == last dim.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps = 1e-5);

// Rank-2 concat/split along axis 0 or 1. split is the exact inverse of concat.
Tensor concat(const std::vector<Tensor>& parts, int axis);
std::vector<Tensor> split(const Tensor& a, int axis, const std::vector<size_t>& sizes);
Tensor slice(const Tensor& a, int axis, size_t start, size_t len);

Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// Per-row log(sum(exp(row))) with max-subtraction: [m x n] -> {m}.
Tensor logsumexp_rows(const Tensor& a);
// Main diagonal of a square matrix: [n x n] -> {n}.
Tensor diag(const Tensor& a);

// Mean of the k largest entries of a rank-1 tensor; ties broken by lower
// index first (deterministic). Gradient routes 1/k to the selected entries.
Tensor topk_mean(const Tensor& a, size_t k);

// S[i][j] = cos(u_i, v_j) with eps-guarded norms: dot / (max(|u_i|,eps) * max(|v_j|,eps)).
Tensor cosine_matrix(const Tensor& u, const Tensor& v, double eps = 1e-8);
// Rank-1 u, v -> scalar in [-1, 1].
Tensor cosine_similarity(const Tensor& u, const Tensor& v, double eps = 1e-8);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }
inline Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return add_scalar(a, -c); }

}  // namespace msbt
