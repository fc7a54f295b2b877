#pragma once

// Shared test utilities. The oracles here are written independently of the
// library's implementation paths: plain nested loops, no im2col, no GEMM.

#include <cmath>
#include <vector>

#include "kdpose/rng.hpp"
#include "kdpose/tensor.hpp"

namespace kdpose::test {

template <typename T>
Tensor<T> random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1.0,
                        double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

/// Brute-force cross-correlation: quadruple loop over output pixels and
/// kernel taps, accumulating in (ci, ky, kx) order.
template <typename T>
Tensor<T> conv2d_oracle(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                        int stride, int padding) {
    const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t cout = weight.dim(0), k = weight.dim(2);
    const std::size_t oh = (h + 2 * padding - k) / stride + 1;
    const std::size_t ow = (w + 2 * padding - k) / stride + 1;
    Tensor<T> out({cout, oh, ow});
    for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                T acc = bias[co];
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride + ky) - padding;
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride + kx) - padding;
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h) || ix < 0 ||
                                ix >= static_cast<std::ptrdiff_t>(w))
                                continue;
                            acc += input.at3(ci, iy, ix) * weight.at4(co, ci, ky, kx);
                        }
                    }
                }
                out.at3(co, oy, ox) = acc;
            }
        }
    }
    return out;
}

inline double max_abs_diff(const TensorD& a, const TensorD& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace kdpose::test
