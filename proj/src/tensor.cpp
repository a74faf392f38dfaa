// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cmgan/error.hpp"

namespace cmgan {
namespace {

constexpr char kBlobMagic[4] = {'C', 'M', 'T', '1'};
constexpr size_t kBlobHeader = 4 + 4 * 4;

template <typename U>
void put_le(std::string& out, U v) {
  using Bits = std::conditional_t<sizeof(U) == 8, uint64_t, uint32_t>;
  Bits b;
  std::memcpy(&b, &v, sizeof(U));
  for (size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((b >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const char* p) {
  using Bits = std::conditional_t<sizeof(U) == 8, uint64_t, uint32_t>;
  Bits b = 0;
  for (size_t i = 0; i < sizeof(U); ++i)
    b |= static_cast<Bits>(static_cast<unsigned char>(p[i])) << (8 * i);
  U v;
  std::memcpy(&v, &b, sizeof(U));
  return v;
}

}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ", " << c << ", " << h << ", " << w << ')';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill)
    : shape_(shape), data_(static_cast<size_t>(shape.numel()), fill) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
    throw DimensionError("negative tensor extent " + shape.str());
}

template <typename T>
Tensor<T>::Tensor(Shape shape, const std::vector<T>& data)
    : shape_(shape), data_(data.begin(), data.end()) {
  if (static_cast<int64_t>(data_.size()) != shape.numel())
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape.str());
}

template <typename T>
T Tensor<T>::item() const {
  if (data_.size() != 1) throw UsageError("item() on tensor of shape " + shape_.str());
  return data_[0];
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape s) const {
  if (s.numel() != shape_.numel())
    throw DimensionError("cannot reshape " + shape_.str() + " to " + s.str());
  Tensor out = *this;
  out.shape_ = s;
  return out;
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
std::string encode_blob(const Tensor<T>& t) {
  std::string out;
  out.reserve(kBlobHeader + t.size() * sizeof(T));
  out.append(kBlobMagic, 4);
  const Shape& s = t.shape();
  for (int64_t d : {s.n, s.c, s.h, s.w}) put_le<uint32_t>(out, static_cast<uint32_t>(d));
  for (T v : t.data()) put_le<T>(out, v);
  return out;
}

Shape peek_blob_shape(std::string_view bytes) {
  if (bytes.size() < kBlobHeader || std::memcmp(bytes.data(), kBlobMagic, 4) != 0)
    throw VersionError("not a CMT1 tensor blob");
  const char* p = bytes.data() + 4;
  return Shape{get_le<uint32_t>(p), get_le<uint32_t>(p + 4), get_le<uint32_t>(p + 8),
               get_le<uint32_t>(p + 12)};
}

template <typename T>
Tensor<T> decode_blob(std::string_view bytes) {
  Shape s = peek_blob_shape(bytes);
  size_t expected = kBlobHeader + static_cast<size_t>(s.numel()) * sizeof(T);
  if (bytes.size() != expected)
    throw IoError("CMT1 blob of shape " + s.str() + " has " + std::to_string(bytes.size()) +
                  " bytes, expected " + std::to_string(expected));
  std::vector<T> data(static_cast<size_t>(s.numel()));
  const char* p = bytes.data() + kBlobHeader;
  for (size_t i = 0; i < data.size(); ++i) data[i] = get_le<T>(p + i * sizeof(T));
  return Tensor<T>(s, std::move(data));
}

void write_blob_file(const std::string& path, const Tensor<float>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  std::string b = encode_blob(t);
  os.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!os) throw IoError("write failed: " + path);
}

Tensor<float> read_blob_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_blob<float>(bytes);
}

template class Tensor<float>;
template class Tensor<double>;
template std::string encode_blob(const Tensor<float>&);
template std::string encode_blob(const Tensor<double>&);
template Tensor<float> decode_blob(std::string_view);
template Tensor<double> decode_blob(std::string_view);

}  // namespace cmgan
