#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "kdpose/error.hpp"

namespace kdpose {

/// Dense row-major tensor over float or double, channels-first layout
/// throughout the project. Rank-3 tensors are (C, H, W).
template <typename T>
class Tensor {
    static_assert(std::is_floating_point_v<T>);

public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
        data_.assign(checked_numel(shape_), T(0));
    }

    Tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        require(data_.size() == checked_numel(shape_), ErrorCode::dimension_mismatch,
                "tensor data length does not match shape");
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, T value) {
        Tensor t(std::move(shape));
        t.fill(value);
        return t;
    }

    static Tensor scalar(T value) { return Tensor({1}, {value}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // (c, y, x) accessor for rank-3 tensors.
    T& at3(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    const T& at3(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    // (o, i, ky, kx) accessor for rank-4 weight tensors.
    T& at4(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
        return data_[((o * shape_[1] + i) * shape_[2] + ky) * shape_[3] + kx];
    }
    const T& at4(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
        return data_[((o * shape_[1] + i) * shape_[2] + ky) * shape_[3] + kx];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }
    void zero() { fill(T(0)); }

    bool all_finite() const {
        for (const T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void check_finite(const char* what) const {
        if (!all_finite()) raise(ErrorCode::numeric, std::string("non-finite values in ") + what);
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(out));
    }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
        require(!shape.empty(), ErrorCode::invalid_argument, "tensor rank must be >= 1");
        std::size_t n = 1;
        for (const std::size_t d : shape) {
            require(d > 0, ErrorCode::invalid_argument, "tensor dims must be positive");
            n *= d;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

} // namespace kdpose
