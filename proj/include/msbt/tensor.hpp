#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace msbt {

using Shape = std::vector<size_t>;

size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One node of the dynamically recorded graph. Interior nodes carry the
// backward closure and parent links; leaves carry neither. backward() frees
// the tape (closures and parent links) as it walks unless retain_graph is set.
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily, same length as data
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    size_t numel() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

// Dense double-precision tensor participating in a reverse-mode graph.
// Cheap to copy: copies share the underlying node (parameters rely on this;
// the modality-shared unimodal transformer is literally the same storage).
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);
    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    size_t numel() const { return node_->data.size(); }
    size_t rows() const;  // rank-2 only
    size_t cols() const;

    const std::vector<double>& values() const { return node_->data; }
    double value_at(size_t i) const { return node_->data[i]; }
    double scalar() const;  // numel()==1 convenience

    bool requires_grad() const { return node_->requires_grad; }
    bool is_leaf() const { return node_->parents.empty() && !node_->backward_fn; }

    // Gradient buffer (empty until a backward pass reaches this tensor).
    const std::vector<double>& grad() const { return node_->grad; }
    void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

    // In-place access to a leaf's values (SGD steps, finite-difference
    // perturbation). Throws ContractError on graph interior nodes.
    std::vector<double>& leaf_values();

    // Reverse-mode pass from a scalar. Seeds d(loss)/d(loss) = seed and
    // accumulates into every reachable requires_grad leaf (+= semantics, so
    // repeated passes without zeroing add up). Visits each recorded node once
    // in reverse topological order. Frees the tape unless retain_graph.
    void backward(double seed = 1.0, bool retain_graph = false) const;

    // Value copy detached from the graph.
    Tensor detach() const;

    std::shared_ptr<detail::Node> node() const { return node_; }
    static Tensor from_node(std::shared_ptr<detail::Node> n);

private:
    std::shared_ptr<detail::Node> node_;
};

}  // namespace msbt
