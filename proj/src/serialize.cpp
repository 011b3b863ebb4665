#include "ovenet/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>

namespace ovenet {
namespace {

constexpr std::array<char, 4> kMagic = {'O', 'V', 'T', 'N'};

template <typename U>
void write_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U read_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw IoError("tensor blob truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& tensor) {
  out.write(kMagic.data(), kMagic.size());
  write_u32(out, kTensorFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (auto extent : tensor.shape()) write_u64(out, static_cast<std::uint64_t>(extent));
  out.put(static_cast<char>(element_type_of<T>()));
  for (T v : tensor.values()) write_le(out, std::bit_cast<Bits<T>>(v));
  if (!out) throw IoError("failed writing tensor blob");
}

template <typename T>
Tensor<T> read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in) throw IoError("tensor blob truncated");
  if (magic != kMagic) throw IoError("tensor blob: bad magic");
  const auto version = read_u32(in);
  if (version != kTensorFormatVersion) {
    throw IoError("tensor blob: unsupported version " + std::to_string(version));
  }
  const auto rank = read_u32(in);
  if (rank > 16) throw IoError("tensor blob: implausible rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& extent : shape) {
    const auto e = read_u64(in);
    if (e > (std::uint64_t{1} << 40)) throw IoError("tensor blob: implausible extent");
    extent = static_cast<std::int64_t>(e);
  }
  const int tag = in.get();
  if (!in) throw IoError("tensor blob truncated");
  if (tag != static_cast<int>(element_type_of<T>())) {
    throw IoError("tensor blob: element type tag " + std::to_string(tag) + " does not match requested type");
  }
  std::vector<T> values(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : values) v = std::bit_cast<T>(read_le<Bits<T>>(in));
  return Tensor<T>(std::move(shape), std::move(values));
}

template void write_tensor(std::ostream&, const Tensor<float>&);
template void write_tensor(std::ostream&, const Tensor<double>&);
template Tensor<float> read_tensor(std::istream&);
template Tensor<double> read_tensor(std::istream&);

}  // namespace ovenet
