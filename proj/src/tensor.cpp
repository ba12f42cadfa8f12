#include "msbt/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "msbt/error.hpp"

namespace msbt {

size_t numel_of(const Shape& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    for (size_t d : shape) {
        if (d == 0) throw DimensionError("tensor: zero dimension in shape " + shape_str(shape));
    }
    if (numel_of(shape) != data.size()) {
        throw DimensionError("tensor: shape " + shape_str(shape) + " needs " +
                             std::to_string(numel_of(shape)) + " values, got " +
                             std::to_string(data.size()));
    }
    node_ = std::make_shared<detail::Node>();
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : Tensor(shape, std::vector<double>(numel_of(shape), fill), requires_grad) {
    for (size_t d : this->shape()) {
        if (d == 0) throw DimensionError("tensor: zero dimension");
    }
}

size_t Tensor::rows() const {
    if (shape().size() != 2) throw ContractError("rows(): tensor is not rank-2, shape " + shape_str(shape()));
    return shape()[0];
}

size_t Tensor::cols() const {
    if (shape().size() != 2) throw ContractError("cols(): tensor is not rank-2, shape " + shape_str(shape()));
    return shape()[1];
}

double Tensor::scalar() const {
    if (numel() != 1) {
        throw ContractError("scalar(): tensor has " + std::to_string(numel()) + " elements");
    }
    return node_->data[0];
}

std::vector<double>& Tensor::leaf_values() {
    if (!is_leaf()) throw ContractError("leaf_values(): cannot mutate a graph interior node");
    return node_->data;
}

Tensor Tensor::detach() const {
    return Tensor(node_->shape, node_->data, false);
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
}

void Tensor::backward(double seed, bool retain_graph) const {
    if (!node_) throw ContractError("backward(): undefined tensor");
    if (numel() != 1) {
        throw ContractError("backward(): loss must be scalar, shape " + shape_str(shape()));
    }

    // Iterative post-order DFS; `order` ends up topologically sorted
    // (parents before children), so we run it back to front. Shared
    // ownership in `order` keeps nodes alive while the walk frees tape edges.
    std::vector<std::shared_ptr<detail::Node>> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<std::shared_ptr<detail::Node>, size_t>> stack;
    stack.emplace_back(node_, 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            const std::shared_ptr<detail::Node>& p = n->parents[next++];
            if (p->requires_grad && seen.insert(p.get()).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    // Interior grads are per-pass scratch: reset them so a retained graph can
    // be replayed. Leaves accumulate across passes.
    for (const auto& n : order) {
        if (n->backward_fn) n->grad.assign(n->data.size(), 0.0);
    }

    node_->ensure_grad();
    node_->grad[0] += seed;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node& n = **it;
        n.ensure_grad();
        if (n.backward_fn) {
            n.backward_fn(n);
            if (!retain_graph) {
                // Reverse topological order means every consumer of this
                // node's grad already ran; the tape entry and scratch grad
                // can go now. Leaves (no backward_fn) keep their grads.
                n.backward_fn = nullptr;
                n.parents.clear();
                n.grad.clear();
                n.grad.shrink_to_fit();
            }
        }
    }
}

}  // namespace msbt
