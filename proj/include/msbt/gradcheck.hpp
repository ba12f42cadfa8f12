#pragma once

#include <functional>
#include <string>
#include <vector>

#include "msbt/tensor.hpp"

namespace msbt {

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool pass = false;
    // Where the worst disagreement sits: leaf index and flat element index.
    size_t worst_leaf = 0;
    size_t worst_elem = 0;
    double analytic = 0.0;
    double numeric = 0.0;

    std::string summary() const;
};

// Compares analytic gradients of f() (a scalar-valued closure over `leaves`)
// against central finite differences with the given step, perturbing every
// element of every leaf. Error is |analytic - numeric| / max(1, |analytic|,
// |numeric|): a plain relative error for O(1) gradients, degrading to an
// absolute test near zero so fd noise cannot fail a correct backward.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                           double step = 1e-5, double tol = 1e-4);

}  // namespace msbt
