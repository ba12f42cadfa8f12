#include "msbt/gradcheck.hpp"

#include <cmath>
#include <cstdio>

#include "msbt/error.hpp"

namespace msbt {

std::string GradCheckReport::summary() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "%s max_rel_err=%.3e (leaf %zu elem %zu: analytic=%.9g numeric=%.9g)",
                  pass ? "PASS" : "FAIL", max_rel_err, worst_leaf, worst_elem, analytic,
                  numeric);
    return buf;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                           double step, double tol) {
    if (leaves.empty()) throw ContractError("grad_check: no leaves to perturb");

    for (auto& leaf : leaves) {
        if (!leaf.is_leaf() || !leaf.requires_grad()) {
            throw ContractError("grad_check: every checked tensor must be a requires_grad leaf");
        }
        leaf.zero_grad();
    }

    Tensor loss = f();
    if (loss.numel() != 1) throw ContractError("grad_check: f must be scalar-valued");
    loss.backward();

    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (auto& leaf : leaves) analytic.push_back(leaf.grad());

    GradCheckReport rep;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& data = leaves[li].leaf_values();
        for (size_t ei = 0; ei < data.size(); ++ei) {
            const double saved = data[ei];
            data[ei] = saved + step;
            const double fp = f().scalar();
            data[ei] = saved - step;
            const double fm = f().scalar();
            data[ei] = saved;

            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[li][ei];
            const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_leaf = li;
                rep.worst_elem = ei;
                rep.analytic = a;
                rep.numeric = numeric;
            }
        }
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

}  // namespace msbt
