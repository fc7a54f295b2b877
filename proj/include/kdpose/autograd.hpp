#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "kdpose/tensor.hpp"

namespace kdpose {

/// One vertex of the computation graph. Leaf nodes are parameters
/// (requires_grad) or constants; interior nodes carry a backward closure
/// that pulls this node's gradient into its parents.
///
/// Gradient contract: backward() re-zeroes interior gradients on every call,
/// while leaf gradients accumulate until explicitly cleared (adam_step does).
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad; // same shape as value, zero-initialized; empty for constants
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;

    explicit Node(Tensor<T> v, bool req = false, const char* tag = "leaf")
        : value(std::move(v)), requires_grad(req), op(tag) {
        if (requires_grad) grad = Tensor<T>(value.shape());
    }

    bool is_leaf() const { return parents.empty(); }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
NodePtr<T> constant(Tensor<T> value) {
    return std::make_shared<Node<T>>(std::move(value), false, "const");
}

template <typename T>
NodePtr<T> parameter(Tensor<T> value) {
    return std::make_shared<Node<T>>(std::move(value), true, "param");
}

template <typename T>
NodePtr<T> conv2d(const NodePtr<T>& input, const NodePtr<T>& weight, const NodePtr<T>& bias,
                  int stride, int padding);

/// Elementwise max(0, x). Subgradient at exactly 0 is 0.
template <typename T>
NodePtr<T> relu(const NodePtr<T>& input);

template <typename T>
NodePtr<T> add(const NodePtr<T>& a, const NodePtr<T>& b);

template <typename T>
NodePtr<T> scale(const NodePtr<T>& a, T factor);

/// Sum of all elements; result has shape (1).
template <typename T>
NodePtr<T> sum(const NodePtr<T>& a);

/// Mean over all elements of squared difference; only `prediction` receives
/// a gradient contribution when `target` is a constant.
template <typename T>
NodePtr<T> mse(const NodePtr<T>& prediction, const NodePtr<T>& target);

/// Sum (not mean) of squared elementwise differences.
template <typename T>
NodePtr<T> sum_sq_diff(const NodePtr<T>& a, const NodePtr<T>& b);

/// Channel slice [begin, end) of a rank-3 tensor.
template <typename T>
NodePtr<T> slice_channels(const NodePtr<T>& x, std::size_t begin, std::size_t end);

/// Reverse-mode sweep from a scalar loss. Visits each reachable node exactly
/// once in reverse topological order. Interior gradients are reset first, so
/// repeated calls accumulate only into leaves.
template <typename T>
void backward(const NodePtr<T>& loss);

} // namespace kdpose
