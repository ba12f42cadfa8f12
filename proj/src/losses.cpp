#include "msbt/losses.hpp"

#include <algorithm>

#include "msbt/error.hpp"
#include "msbt/ops.hpp"

namespace msbt {

void LossConfig::validate() const {
    if (!(tau > 0.0)) throw ConfigError("loss config: tau must be positive");
    if (topk < 1) throw ConfigError("loss config: topk must be >= 1");
    if (lambda < 0.0) throw ConfigError("loss config: lambda must be >= 0");
}

Tensor tcc_loss(const std::vector<Tensor>& weighted_pairs, double tau) {
    if (weighted_pairs.size() < 2) {
        throw ContractError("tcc_loss: needs at least 2 fused pairs, got " +
                            std::to_string(weighted_pairs.size()));
    }
    if (!(tau > 0.0)) throw ConfigError("tcc_loss: tau must be positive");
    const size_t n_f = weighted_pairs.size();
    const size_t t = weighted_pairs[0].rows();
    for (const auto& z : weighted_pairs) {
        if (z.shape() != weighted_pairs[0].shape()) {
            throw DimensionError("tcc_loss: pair feature shapes disagree: " +
                                 shape_str(z.shape()) + " vs " +
                                 shape_str(weighted_pairs[0].shape()));
        }
    }

    const double inv_tau = 1.0 / tau;
    Tensor acc;
    for (size_t p = 0; p < n_f; ++p) {
        for (size_t q = 0; q < n_f; ++q) {
            if (q == p) continue;
            // S[t][k] = cos(Z^p_t, Z^q_k) / tau; the anchor-positive term is
            // the diagonal, the denominator runs over all snippets k.
            Tensor s = mul_scalar(cosine_matrix(weighted_pairs[p], weighted_pairs[q]), inv_tau);
            Tensor term = sum(sub(logsumexp_rows(s), diag(s)));
            acc = acc.defined() ? add(acc, term) : term;
        }
    }
    return mul_scalar(acc, 1.0 / (static_cast<double>(n_f) * static_cast<double>(t)));
}

Tensor mil_topk_loss(const Tensor& scores, int video_label, size_t k) {
    if (scores.shape().size() != 1) {
        throw DimensionError("mil_topk_loss: scores must be rank-1, got " +
                             shape_str(scores.shape()));
    }
    if (video_label != 0 && video_label != 1) {
        throw ContractError("mil_topk_loss: label must be 0 or 1, got " +
                            std::to_string(video_label));
    }
    if (k < 1) throw ContractError("mil_topk_loss: k must be >= 1");
    for (double s : scores.values()) {
        if (!(s > 0.0 && s < 1.0)) {
            throw DomainError("mil_topk_loss: score " + std::to_string(s) +
                              " outside (0, 1)");
        }
    }
    const size_t k_eff = std::min(k, scores.numel());
    Tensor sbar = clamp(topk_mean(scores, k_eff), 1e-12, 1.0 - 1e-12);
    const double y = static_cast<double>(video_label);
    Tensor pos = mul_scalar(log(sbar), -y);
    Tensor neg = mul_scalar(log(add_scalar(mul_scalar(sbar, -1.0), 1.0)), -(1.0 - y));
    return add(pos, neg);
}

Tensor total_loss(const Tensor& mil, const Tensor& tcc, double lambda) {
    if (lambda == 0.0) return mil;
    return add(mil, mul_scalar(tcc, lambda));
}

}  // namespace msbt
