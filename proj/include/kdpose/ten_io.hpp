#pragma once

#include <cstdint>
#include <string>

#include "kdpose/tensor.hpp"

namespace kdpose {

// "TEN1" binary tensor file:
//   4-byte magic "TEN1"
//   u8 dtype code (1 = float32, 2 = float64)
//   u8 rank
//   rank x u64 little-endian dims
//   raw little-endian row-major payload

template <typename T>
void write_tensor(const Tensor<T>& tensor, const std::string& path);

/// Reads a TEN1 file, converting the payload to T if the stored dtype differs.
template <typename T>
Tensor<T> read_tensor(const std::string& path);

/// Stored dtype code of a TEN1 file without reading the payload.
int peek_tensor_dtype(const std::string& path);

} // namespace kdpose
