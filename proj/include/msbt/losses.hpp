#pragma once

#include <vector>

#include "msbt/tensor.hpp"

namespace msbt {

struct LossConfig {
    double tau = 0.5;    // temperature of the temporal consistency contrast
    size_t topk = 9;     // top-K count of the MIL loss
    double lambda = 0.1; // contrast weight in the joint loss

    void validate() const;
};

// Temporal consistency contrast over the (weighted) pairwise fused features
// of one video. For every snippet t, every ordered pair p, and every other
// ordered pair q != p, accumulates the InfoNCE term
//   -log( exp(cos(Z^p_t, Z^q_t)/tau) / sum_k exp(cos(Z^p_t, Z^q_k)/tau) )
// and divides the total by N_F * T. Computed via log-sum-exp with
// max-subtraction; differentiable; always >= 0.
Tensor tcc_loss(const std::vector<Tensor>& weighted_pairs, double tau);

// Binary cross-entropy on the mean of the top-min(k, T) scores. Scores must
// lie strictly in (0, 1); the top-K mean is clamped to [1e-12, 1-1e-12]
// before the logs so a saturated sigmoid cannot produce an infinite loss.
Tensor mil_topk_loss(const Tensor& scores, int video_label, size_t k);

// mil + lambda * tcc.
Tensor total_loss(const Tensor& mil, const Tensor& tcc, double lambda);

}  // namespace msbt
