// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cmgan {

// Rank-4 extent in (batch, channel, height, width) order.
struct Shape {
  int64_t n = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  constexpr int64_t numel() const { return n * c * h * w; }
  constexpr int64_t operator[](int axis) const {
    return axis == 0 ? n : axis == 1 ? c : axis == 2 ? h : w;
  }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
  std::string str() const;
};

enum class Precision { kSingle, kDouble };

template <typename T>
inline constexpr Precision precision_of =
    sizeof(T) == sizeof(double) ? Precision::kDouble : Precision::kSingle;

// Cache-line aligned storage. Vectorized kernels peel unaligned heads, so
// their summation order, and hence float results, would otherwise depend on
// where the allocator placed a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

// Dense row-major (n, c, h, w) array with value semantics.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, const std::vector<T>& data);

  static Tensor scalar(T v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }

  T& operator[](size_t i) { return data_[i]; }
  T operator[](size_t i) const { return data_[i]; }

  size_t offset(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return static_cast<size_t>(((n * shape_.c + c) * shape_.h + h) * shape_.w + w);
  }
  T& at(int64_t n, int64_t c, int64_t h, int64_t w) { return data_[offset(n, c, h, w)]; }
  T at(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data_[offset(n, c, h, w)];
  }

  // Value of a single-element tensor.
  T item() const;

  Tensor reshaped(Shape s) const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<T, AlignedAllocator<T>> data_;
};

// "CMT1" blob: magic, four little-endian uint32 dims, little-endian IEEE-754
// scalars. The scalar width is implied by the total byte count.
template <typename T>
std::string encode_blob(const Tensor<T>& t);

template <typename T>
Tensor<T> decode_blob(std::string_view bytes);

// Shape recorded in a blob header without decoding the payload.
Shape peek_blob_shape(std::string_view bytes);

void write_blob_file(const std::string& path, const Tensor<float>& t);
Tensor<float> read_blob_file(const std::string& path);

}  // namespace cmgan
