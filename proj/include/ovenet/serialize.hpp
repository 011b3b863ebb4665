#pragma once

// Binary tensor blobs, little-endian:
//   "OVTN" | version u32 | rank u32 | extents u64 x rank | type tag u8 | values
// Type tag 0 = f32, 1 = f64.

#include <cstdint>
#include <istream>
#include <ostream>

#include "ovenet/tensor.hpp"

namespace ovenet {

inline constexpr std::uint32_t kTensorFormatVersion = 1;

enum class ElementType : std::uint8_t { kF32 = 0, kF64 = 1 };

template <typename T>
constexpr ElementType element_type_of();
template <>
constexpr ElementType element_type_of<float>() {
  return ElementType::kF32;
}
template <>
constexpr ElementType element_type_of<double>() {
  return ElementType::kF64;
}

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& tensor);

/// Throws IoError on bad magic, unknown version, element-type mismatch, or a
/// truncated stream.
template <typename T>
Tensor<T> read_tensor(std::istream& in);

// Little-endian scalar helpers shared with the checkpoint writer.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);

}  // namespace ovenet
