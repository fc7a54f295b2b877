#pragma once

#include <cstdint>
#include <span>

#include "kdpose/autograd.hpp"

namespace kdpose {

/// First/second-moment accumulators for Adam, one pair per parameter tensor.
template <typename T>
struct AdamState {
    std::vector<Tensor<T>> first_moment;
    std::vector<Tensor<T>> second_moment;
    std::int64_t step = 0;
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);

    static AdamState init(std::span<const NodePtr<T>> params) {
        AdamState s;
        s.first_moment.reserve(params.size());
        s.second_moment.reserve(params.size());
        for (const auto& p : params) {
            s.first_moment.emplace_back(p->value.shape());
            s.second_moment.emplace_back(p->value.shape());
        }
        return s;
    }
};

/// Bias-corrected Adam update over the populated gradients, then zeroes them.
template <typename T>
void adam_step(std::span<const NodePtr<T>> params, AdamState<T>& state, T lr);

} // namespace kdpose
