#include "kdpose/autograd.hpp"

#include <algorithm>
#include <unordered_set>

#include "kdpose/conv.hpp"

namespace kdpose {

namespace {

template <typename T>
NodePtr<T> make_op(Tensor<T> value, const char* tag, std::vector<NodePtr<T>> parents) {
    bool req = false;
    for (const auto& p : parents) req = req || p->requires_grad;
    auto node = std::make_shared<Node<T>>(std::move(value), req, tag);
    node->parents = std::move(parents);
    return node;
}

} // namespace

template <typename T>
NodePtr<T> conv2d(const NodePtr<T>& input, const NodePtr<T>& weight, const NodePtr<T>& bias,
                  int stride, int padding) {
    const ops::ConvDims dims = ops::conv_dims(input->value.shape(), weight->value.shape(),
                                              bias->value.shape(), stride, padding);
    auto col = std::make_shared<Tensor<T>>();
    Tensor<T> out =
        ops::conv2d_forward(dims, input->value, weight->value, bias->value, col.get());
    auto node = make_op(std::move(out), "conv2d", {input, weight, bias});
    if (node->requires_grad) {
        node->backward_fn = [dims, col](Node<T>& self) {
            Node<T>& in = *self.parents[0];
            Node<T>& w = *self.parents[1];
            Node<T>& b = *self.parents[2];
            ops::conv2d_backward(dims, in.value, w.value, *col, self.grad,
                                 in.requires_grad ? &in.grad : nullptr,
                                 w.requires_grad ? &w.grad : nullptr,
                                 b.requires_grad ? &b.grad : nullptr);
        };
    }
    return node;
}

template <typename T>
NodePtr<T> relu(const NodePtr<T>& input) {
    Tensor<T> out(input->value.shape());
    const T* x = input->value.data();
    T* y = out.data();
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    auto node = make_op(std::move(out), "relu", {input});
    if (node->requires_grad) {
        node->backward_fn = [](Node<T>& self) {
            Node<T>& in = *self.parents[0];
            if (!in.requires_grad) return;
            const T* x = in.value.data();
            const T* g = self.grad.data();
            T* dx = in.grad.data();
            const std::size_t n = self.grad.numel();
            for (std::size_t i = 0; i < n; ++i)
                if (x[i] > T(0)) dx[i] += g[i];
        };
    }
    return node;
}

template <typename T>
NodePtr<T> add(const NodePtr<T>& a, const NodePtr<T>& b) {
    require(a->value.same_shape(b->value), ErrorCode::dimension_mismatch,
            "add: shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
    Tensor<T> out(a->value.shape());
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out[i] = a->value[i] + b->value[i];
    auto node = make_op(std::move(out), "add", {a, b});
    if (node->requires_grad) {
        node->backward_fn = [](Node<T>& self) {
            const std::size_t n = self.grad.numel();
            for (int pi = 0; pi < 2; ++pi) {
                Node<T>& p = *self.parents[pi];
                if (!p.requires_grad) continue;
                for (std::size_t i = 0; i < n; ++i) p.grad[i] += self.grad[i];
            }
        };
    }
    return node;
}

template <typename T>
NodePtr<T> scale(const NodePtr<T>& a, T factor) {
    Tensor<T> out(a->value.shape());
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out[i] = a->value[i] * factor;
    auto node = make_op(std::move(out), "scale", {a});
    if (node->requires_grad) {
        node->backward_fn = [factor](Node<T>& self) {
            Node<T>& p = *self.parents[0];
            if (!p.requires_grad) return;
            const std::size_t n = self.grad.numel();
            for (std::size_t i = 0; i < n; ++i) p.grad[i] += factor * self.grad[i];
        };
    }
    return node;
}

template <typename T>
NodePtr<T> sum(const NodePtr<T>& a) {
    T acc = T(0);
    const std::size_t n = a->value.numel();
    for (std::size_t i = 0; i < n; ++i) acc += a->value[i];
    auto node = make_op(Tensor<T>::scalar(acc), "sum", {a});
    if (node->requires_grad) {
        node->backward_fn = [](Node<T>& self) {
            Node<T>& p = *self.parents[0];
            if (!p.requires_grad) return;
            const T g = self.grad[0];
            const std::size_t n = p.grad.numel();
            for (std::size_t i = 0; i < n; ++i) p.grad[i] += g;
        };
    }
    return node;
}

namespace {

template <typename T>
NodePtr<T> squared_diff_reduce(const NodePtr<T>& a, const NodePtr<T>& b, T normalizer,
                               const char* tag) {
    require(a->value.same_shape(b->value), ErrorCode::dimension_mismatch,
            std::string(tag) + ": shape mismatch " + a->value.shape_str() + " vs " +
                b->value.shape_str());
    const std::size_t n = a->value.numel();
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T d = a->value[i] - b->value[i];
        acc += d * d;
    }
    auto node = make_op(Tensor<T>::scalar(acc * normalizer), tag, {a, b});
    if (node->requires_grad) {
        node->backward_fn = [normalizer](Node<T>& self) {
            Node<T>& a = *self.parents[0];
            Node<T>& b = *self.parents[1];
            const T g2 = T(2) * normalizer * self.grad[0];
            const std::size_t n = a.value.numel();
            for (std::size_t i = 0; i < n; ++i) {
                const T d = g2 * (a.value[i] - b.value[i]);
                if (a.requires_grad) a.grad[i] += d;
                if (b.requires_grad) b.grad[i] -= d;
            }
        };
    }
    return node;
}

} // namespace

template <typename T>
NodePtr<T> mse(const NodePtr<T>& prediction, const NodePtr<T>& target) {
    const T inv_n = T(1) / static_cast<T>(prediction->value.numel());
    return squared_diff_reduce(prediction, target, inv_n, "mse");
}

template <typename T>
NodePtr<T> sum_sq_diff(const NodePtr<T>& a, const NodePtr<T>& b) {
    return squared_diff_reduce(a, b, T(1), "sum_sq_diff");
}

template <typename T>
NodePtr<T> slice_channels(const NodePtr<T>& x, std::size_t begin, std::size_t end) {
    require(x->value.rank() == 3, ErrorCode::dimension_mismatch,
            "slice_channels expects a rank-3 tensor");
    require(begin < end && end <= x->value.dim(0), ErrorCode::invalid_argument,
            "slice_channels: bad channel range");
    const std::size_t plane = x->value.dim(1) * x->value.dim(2);
    Tensor<T> out({end - begin, x->value.dim(1), x->value.dim(2)});
    std::copy_n(x->value.data() + begin * plane, (end - begin) * plane, out.data());
    auto node = make_op(std::move(out), "slice", {x});
    if (node->requires_grad) {
        node->backward_fn = [begin, plane](Node<T>& self) {
            Node<T>& p = *self.parents[0];
            if (!p.requires_grad) return;
            const std::size_t n = self.grad.numel();
            T* dst = p.grad.data() + begin * plane;
            const T* src = self.grad.data();
            for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
        };
    }
    return node;
}

template <typename T>
void backward(const NodePtr<T>& loss) {
    require(loss != nullptr, ErrorCode::invalid_argument, "backward: null loss node");
    require(loss->value.numel() == 1, ErrorCode::invalid_argument,
            "backward requires a scalar loss");
    if (!loss->requires_grad) return; // nothing reachable wants a gradient

    // Iterative post-order DFS; each node appears once even under diamonds.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* parent = node->parents[next++].get();
            if (visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node<T>* node : order)
        if (!node->is_leaf() && node->requires_grad) node->grad.zero();
    loss->grad[0] += T(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->requires_grad && node->backward_fn) node->backward_fn(*node);
    }
}

#define KDPOSE_INSTANTIATE_AUTOGRAD(T)                                                      \
    template NodePtr<T> conv2d<T>(const NodePtr<T>&, const NodePtr<T>&, const NodePtr<T>&, \
                                  int, int);                                                \
    template NodePtr<T> relu<T>(const NodePtr<T>&);                                         \
    template NodePtr<T> add<T>(const NodePtr<T>&, const NodePtr<T>&);                       \
    template NodePtr<T> scale<T>(const NodePtr<T>&, T);                                     \
    template NodePtr<T> sum<T>(const NodePtr<T>&);                                          \
    template NodePtr<T> mse<T>(const NodePtr<T>&, const NodePtr<T>&);                       \
    template NodePtr<T> sum_sq_diff<T>(const NodePtr<T>&, const NodePtr<T>&);               \
    template NodePtr<T> slice_channels<T>(const NodePtr<T>&, std::size_t, std::size_t);     \
    template void backward<T>(const NodePtr<T>&);

KDPOSE_INSTANTIATE_AUTOGRAD(float)
KDPOSE_INSTANTIATE_AUTOGRAD(double)

} // namespace kdpose
