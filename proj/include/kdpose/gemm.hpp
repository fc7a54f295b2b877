#pragma once

#include <cstddef>

namespace kdpose::ops {

// Row-major GEMM kernels sized for small convolutional workloads.
// When accumulate is false, C is overwritten; otherwise C += result.

/// C[m,n] = sum_k A[m,k] * B[k,n];  A: MxK, B: KxN, C: MxN
template <typename T>
void gemm_nn(std::size_t m_dim, std::size_t k_dim, std::size_t n_dim,
             const T* a, const T* b, T* c, bool accumulate);

/// C[m,n] = sum_k A[m,k] * B[n,k];  A: MxK, B: NxK, C: MxN
template <typename T>
void gemm_nt(std::size_t m_dim, std::size_t k_dim, std::size_t n_dim,
             const T* a, const T* b, T* c, bool accumulate);

/// C[m,n] = sum_l A[l,m] * B[l,n];  A: LxM, B: LxN, C: MxN
template <typename T>
void gemm_tn(std::size_t l_dim, std::size_t m_dim, std::size_t n_dim,
             const T* a, const T* b, T* c, bool accumulate);

} // namespace kdpose::ops
