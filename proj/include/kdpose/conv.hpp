#pragma once

#include "kdpose/tensor.hpp"

namespace kdpose::ops {

struct ConvDims {
    std::size_t cin = 0, h = 0, w = 0;
    std::size_t cout = 0, k = 0;
    std::size_t stride = 1, padding = 0;
    std::size_t oh = 0, ow = 0;

    std::size_t patch() const { return cin * k * k; } // im2col row count
    std::size_t pixels() const { return oh * ow; }
};

/// Validates the conv contract (k in {1,3}, stride in {1,2}, matching channel
/// counts, non-empty output) and computes output sizes.
ConvDims conv_dims(const std::vector<std::size_t>& input_shape,
                   const std::vector<std::size_t>& weight_shape,
                   const std::vector<std::size_t>& bias_shape, int stride, int padding);

template <typename T>
void im2col(const ConvDims& d, const Tensor<T>& input, Tensor<T>& col);

/// Cross-correlation. When col_cache is non-null the im2col matrix is left
/// there for reuse by the backward pass.
template <typename T>
Tensor<T> conv2d_forward(const ConvDims& d, const Tensor<T>& input, const Tensor<T>& weight,
                         const Tensor<T>& bias, Tensor<T>* col_cache);

/// Accumulates parameter/input gradients; any of the gradient outputs may be
/// null. col must be the matrix cached by the forward pass (ignored for the
/// 1x1/stride-1 fast path, which reads input directly).
template <typename T>
void conv2d_backward(const ConvDims& d, const Tensor<T>& input, const Tensor<T>& weight,
                     const Tensor<T>& col, const Tensor<T>& grad_output, Tensor<T>* grad_input,
                     Tensor<T>* grad_weight, Tensor<T>* grad_bias);

} // namespace kdpose::ops
