#include "kdpose/gemm.hpp"

#include <cstring>

namespace kdpose::ops {

namespace {

// Lane-split dot product: fixed per-lane accumulation order keeps results
// deterministic while letting the compiler vectorize without -ffast-math.
template <typename T>
T dot(std::size_t n, const T* a, const T* b) {
    constexpr std::size_t kLanes = 16;
    T lanes[kLanes] = {};
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes)
        for (std::size_t l = 0; l < kLanes; ++l) lanes[l] += a[i + l] * b[i + l];
    T tail = T(0);
    for (; i < n; ++i) tail += a[i] * b[i];
    T sum = tail;
    for (std::size_t l = 0; l < kLanes; ++l) sum += lanes[l];
    return sum;
}

} // namespace

template <typename T>
void gemm_nn(std::size_t m_dim, std::size_t k_dim, std::size_t n_dim,
             const T* a, const T* b, T* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(T) * m_dim * n_dim);
    std::size_t m = 0;
    for (; m + 4 <= m_dim; m += 4) {
        T* c0 = c + m * n_dim;
        T* c1 = c0 + n_dim;
        T* c2 = c1 + n_dim;
        T* c3 = c2 + n_dim;
        const T* a0 = a + m * k_dim;
        const T* a1 = a0 + k_dim;
        const T* a2 = a1 + k_dim;
        const T* a3 = a2 + k_dim;
        for (std::size_t k = 0; k < k_dim; ++k) {
            const T v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
            const T* br = b + k * n_dim;
            for (std::size_t n = 0; n < n_dim; ++n) {
                const T bv = br[n];
                c0[n] += v0 * bv;
                c1[n] += v1 * bv;
                c2[n] += v2 * bv;
                c3[n] += v3 * bv;
            }
        }
    }
    for (; m < m_dim; ++m) {
        T* cr = c + m * n_dim;
        const T* ar = a + m * k_dim;
        for (std::size_t k = 0; k < k_dim; ++k) {
            const T av = ar[k];
            const T* br = b + k * n_dim;
            for (std::size_t n = 0; n < n_dim; ++n) cr[n] += av * br[n];
        }
    }
}

template <typename T>
void gemm_nt(std::size_t m_dim, std::size_t k_dim, std::size_t n_dim,
             const T* a, const T* b, T* c, bool accumulate) {
    for (std::size_t m = 0; m < m_dim; ++m) {
        const T* ar = a + m * k_dim;
        T* cr = c + m * n_dim;
        for (std::size_t n = 0; n < n_dim; ++n) {
            const T d = dot(k_dim, ar, b + n * k_dim);
            cr[n] = accumulate ? cr[n] + d : d;
        }
    }
}

template <typename T>
void gemm_tn(std::size_t l_dim, std::size_t m_dim, std::size_t n_dim,
             const T* a, const T* b, T* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(T) * m_dim * n_dim);
    std::size_t l = 0;
    for (; l + 4 <= l_dim; l += 4) {
        const T* a0 = a + l * m_dim;
        const T* a1 = a0 + m_dim;
        const T* a2 = a1 + m_dim;
        const T* a3 = a2 + m_dim;
        const T* b0 = b + l * n_dim;
        const T* b1 = b0 + n_dim;
        const T* b2 = b1 + n_dim;
        const T* b3 = b2 + n_dim;
        for (std::size_t m = 0; m < m_dim; ++m) {
            const T v0 = a0[m], v1 = a1[m], v2 = a2[m], v3 = a3[m];
            T* cr = c + m * n_dim;
            for (std::size_t n = 0; n < n_dim; ++n)
                cr[n] += v0 * b0[n] + v1 * b1[n] + v2 * b2[n] + v3 * b3[n];
        }
    }
    for (; l < l_dim; ++l) {
        const T* ar = a + l * m_dim;
        const T* br = b + l * n_dim;
        for (std::size_t m = 0; m < m_dim; ++m) {
            const T av = ar[m];
            T* cr = c + m * n_dim;
            for (std::size_t n = 0; n < n_dim; ++n) cr[n] += av * br[n];
        }
    }
}

#define KDPOSE_INSTANTIATE_GEMM(T)                                                           \
    template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, \
                             bool);                                                          \
    template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, \
                             bool);                                                          \
    template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, \
                             bool);

KDPOSE_INSTANTIATE_GEMM(float)
KDPOSE_INSTANTIATE_GEMM(double)

} // namespace kdpose::ops
