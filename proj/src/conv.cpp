#include "kdpose/conv.hpp"

#include "kdpose/gemm.hpp"

namespace kdpose::ops {

ConvDims conv_dims(const std::vector<std::size_t>& input_shape,
                   const std::vector<std::size_t>& weight_shape,
                   const std::vector<std::size_t>& bias_shape, int stride, int padding) {
    require(input_shape.size() == 3, ErrorCode::dimension_mismatch,
            "conv2d input must be rank-3 (C, H, W)");
    require(weight_shape.size() == 4, ErrorCode::dimension_mismatch,
            "conv2d weight must be rank-4 (Cout, Cin, k, k)");
    require(bias_shape.size() == 1 && bias_shape[0] == weight_shape[0],
            ErrorCode::dimension_mismatch, "conv2d bias must be rank-1 of length Cout");
    require(weight_shape[2] == weight_shape[3], ErrorCode::dimension_mismatch,
            "conv2d kernel must be square");
    require(input_shape[0] == weight_shape[1], ErrorCode::dimension_mismatch,
            "conv2d input channels do not match weight Cin");

    ConvDims d;
    d.cin = input_shape[0];
    d.h = input_shape[1];
    d.w = input_shape[2];
    d.cout = weight_shape[0];
    d.k = weight_shape[2];
    require(d.k == 1 || d.k == 3, ErrorCode::invalid_argument, "conv2d kernel size must be 1 or 3");
    require(stride == 1 || stride == 2, ErrorCode::invalid_argument, "conv2d stride must be 1 or 2");
    require(padding >= 0, ErrorCode::invalid_argument, "conv2d padding must be >= 0");
    d.stride = static_cast<std::size_t>(stride);
    d.padding = static_cast<std::size_t>(padding);

    const std::ptrdiff_t oh = (static_cast<std::ptrdiff_t>(d.h) + 2 * padding -
                               static_cast<std::ptrdiff_t>(d.k)) / stride + 1;
    const std::ptrdiff_t ow = (static_cast<std::ptrdiff_t>(d.w) + 2 * padding -
                               static_cast<std::ptrdiff_t>(d.k)) / stride + 1;
    require(oh >= 1 && ow >= 1, ErrorCode::dimension_mismatch, "conv2d output would be empty");
    d.oh = static_cast<std::size_t>(oh);
    d.ow = static_cast<std::size_t>(ow);
    return d;
}

namespace {

bool is_identity_layout(const ConvDims& d) {
    return d.k == 1 && d.stride == 1 && d.padding == 0;
}

} // namespace

template <typename T>
void im2col(const ConvDims& d, const Tensor<T>& input, Tensor<T>& col) {
    col = Tensor<T>({d.patch(), d.pixels()});
    T* out = col.data();
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(d.padding);
    for (std::size_t ci = 0; ci < d.cin; ++ci) {
        for (std::size_t ky = 0; ky < d.k; ++ky) {
            for (std::size_t kx = 0; kx < d.k; ++kx) {
                for (std::size_t oy = 0; oy < d.oh; ++oy) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy * d.stride + ky) - pad;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) {
                        out += d.ow;
                        continue;
                    }
                    const T* in_row = &input.at3(ci, static_cast<std::size_t>(iy), 0);
                    for (std::size_t ox = 0; ox < d.ow; ++ox) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox * d.stride + kx) - pad;
                        *out++ = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w))
                                     ? T(0)
                                     : in_row[ix];
                    }
                }
            }
        }
    }
}

template <typename T>
Tensor<T> conv2d_forward(const ConvDims& d, const Tensor<T>& input, const Tensor<T>& weight,
                         const Tensor<T>& bias, Tensor<T>* col_cache) {
    Tensor<T> out({d.cout, d.oh, d.ow});
    const T* col_ptr = nullptr;
    Tensor<T> local_col;
    if (is_identity_layout(d)) {
        col_ptr = input.data(); // CHW buffer already is the (Cin x HW) matrix
    } else {
        Tensor<T>& col = col_cache ? *col_cache : local_col;
        im2col(d, input, col);
        col_ptr = col.data();
    }
    gemm_nn(d.cout, d.patch(), d.pixels(), weight.data(), col_ptr, out.data(), false);
    const std::size_t pixels = d.pixels();
    for (std::size_t co = 0; co < d.cout; ++co) {
        const T b = bias[co];
        T* row = out.data() + co * pixels;
        for (std::size_t p = 0; p < pixels; ++p) row[p] += b;
    }
    return out;
}

namespace {

template <typename T>
void col2im_accumulate(const ConvDims& d, const Tensor<T>& dcol, Tensor<T>& grad_input) {
    const T* src = dcol.data();
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(d.padding);
    for (std::size_t ci = 0; ci < d.cin; ++ci) {
        for (std::size_t ky = 0; ky < d.k; ++ky) {
            for (std::size_t kx = 0; kx < d.k; ++kx) {
                for (std::size_t oy = 0; oy < d.oh; ++oy) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy * d.stride + ky) - pad;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) {
                        src += d.ow;
                        continue;
                    }
                    T* grad_row = &grad_input.at3(ci, static_cast<std::size_t>(iy), 0);
                    for (std::size_t ox = 0; ox < d.ow; ++ox) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox * d.stride + kx) - pad;
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(d.w))
                            grad_row[ix] += *src;
                        ++src;
                    }
                }
            }
        }
    }
}

} // namespace

template <typename T>
void conv2d_backward(const ConvDims& d, const Tensor<T>& input, const Tensor<T>& weight,
                     const Tensor<T>& col, const Tensor<T>& grad_output, Tensor<T>* grad_input,
                     Tensor<T>* grad_weight, Tensor<T>* grad_bias) {
    const std::size_t pixels = d.pixels();
    if (grad_bias) {
        for (std::size_t co = 0; co < d.cout; ++co) {
            const T* row = grad_output.data() + co * pixels;
            T acc = T(0);
            for (std::size_t p = 0; p < pixels; ++p) acc += row[p];
            (*grad_bias)[co] += acc;
        }
    }
    const bool identity = is_identity_layout(d);
    if (grad_weight) {
        const T* col_ptr = identity ? input.data() : col.data();
        gemm_nt(d.cout, pixels, d.patch(), grad_output.data(), col_ptr, grad_weight->data(),
                true);
    }
    if (grad_input) {
        if (identity) {
            gemm_tn(d.cout, d.patch(), pixels, weight.data(), grad_output.data(),
                    grad_input->data(), true);
        } else {
            Tensor<T> dcol({d.patch(), pixels});
            gemm_tn(d.cout, d.patch(), pixels, weight.data(), grad_output.data(), dcol.data(),
                    false);
            col2im_accumulate(d, dcol, *grad_input);
        }
    }
}

#define KDPOSE_INSTANTIATE_CONV(T)                                                          \
    template void im2col<T>(const ConvDims&, const Tensor<T>&, Tensor<T>&);                 \
    template Tensor<T> conv2d_forward<T>(const ConvDims&, const Tensor<T>&,                 \
                                         const Tensor<T>&, const Tensor<T>&, Tensor<T>*);   \
    template void conv2d_backward<T>(const ConvDims&, const Tensor<T>&, const Tensor<T>&,   \
                                     const Tensor<T>&, const Tensor<T>&, Tensor<T>*,        \
                                     Tensor<T>*, Tensor<T>*);

KDPOSE_INSTANTIATE_CONV(float)
KDPOSE_INSTANTIATE_CONV(double)

} // namespace kdpose::ops
