#include "kdpose/adam.hpp"

#include <cmath>

namespace kdpose {

template <typename T>
void adam_step(std::span<const NodePtr<T>> params, AdamState<T>& state, T lr) {
    require(params.size() == state.first_moment.size(), ErrorCode::invalid_argument,
            "adam_step: state does not match parameter list");
    state.step += 1;
    const T b1 = state.beta1;
    const T b2 = state.beta2;
    const T bias1 = T(1) - static_cast<T>(std::pow(static_cast<double>(b1),
                                                   static_cast<double>(state.step)));
    const T bias2 = T(1) - static_cast<T>(std::pow(static_cast<double>(b2),
                                                   static_cast<double>(state.step)));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Node<T>& p = *params[pi];
        Tensor<T>& m = state.first_moment[pi];
        Tensor<T>& v = state.second_moment[pi];
        require(m.same_shape(p.value), ErrorCode::dimension_mismatch,
                "adam_step: accumulator shape mismatch");
        const std::size_t n = p.value.numel();
        for (std::size_t i = 0; i < n; ++i) {
            const T g = p.grad[i];
            m[i] = b1 * m[i] + (T(1) - b1) * g;
            v[i] = b2 * v[i] + (T(1) - b2) * g * g;
            const T m_hat = m[i] / bias1;
            const T v_hat = v[i] / bias2;
            p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
        p.grad.zero();
        p.value.check_finite("parameter after adam_step");
    }
}

template void adam_step<float>(std::span<const NodePtr<float>>, AdamState<float>&, float);
template void adam_step<double>(std::span<const NodePtr<double>>, AdamState<double>&, double);

} // namespace kdpose
