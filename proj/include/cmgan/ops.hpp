// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <type_traits>
#include <vector>

#include "cmgan/graph.hpp"

namespace cmgan {

// Bitmask over the four tensor axes.
struct Axes {
  static constexpr unsigned kN = 1, kC = 2, kH = 4, kW = 8;
  static constexpr unsigned kSpatial = kH | kW;
  static constexpr unsigned kAll = kN | kC | kH | kW;
};

// Binary ops accept identical shapes, or a (1,1,1,1) operand on either side.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> div(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> scale(const Var<T>& x, T k);
template <typename T> Var<T> add_scalar(const Var<T>& x, T k);
template <typename T> Var<T> abs(const Var<T>& x);
template <typename T> Var<T> square(const Var<T>& x);
template <typename T> Var<T> tanh(const Var<T>& x);
template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> leaky_relu(const Var<T>& x, T alpha);
template <typename T> Var<T> sigmoid(const Var<T>& x);
// Throws DomainError on non-positive input.
template <typename T> Var<T> log(const Var<T>& x);
// log(sigmoid(x)) evaluated without overflow for large |x|.
template <typename T> Var<T> log_sigmoid(const Var<T>& x);
// max(x, 0)^p for p > 0; the gradient is 0 where x <= 0.
template <typename T> Var<T> pow_pos(const Var<T>& x, T p);

// Sum/mean over the axes in `axes`; reduced axes keep extent 1.
template <typename T> Var<T> sum(const Var<T>& x, unsigned axes = Axes::kAll);
template <typename T> Var<T> mean(const Var<T>& x, unsigned axes = Axes::kAll);

// Max-subtracted softmax along a single axis (0..3).
template <typename T> Var<T> softmax(const Var<T>& x, int axis);

// (n,c,p,q) x (n,c,q,r) -> (n,c,p,r): one matrix product per (n, c).
template <typename T> Var<T> batched_matmul(const Var<T>& a, const Var<T>& b);
// (n,c,h,w) -> (n,1,c,c) with entry (i, j) = sum over h,w of x_i x_j. The
// result is exactly symmetric.
template <typename T> Var<T> gram(const Var<T>& x);
// Swaps the last two axes.
template <typename T> Var<T> transpose_hw(const Var<T>& x);
template <typename T> Var<T> reshape(const Var<T>& x, Shape s);

// weight (c_out, c_in, k, k), bias (1, c_out, 1, 1) or absent.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const std::optional<std::type_identity_t<Var<T>>>& bias,
              int stride, int padding);

// Adjoint of conv2d with the same weight layout: maps c_out channels of a
// (n, c_out, h, w) input back to c_in channels at size (h-1)*stride - 2*padding + k.
template <typename T>
Var<T> conv2d_transpose(const Var<T>& x, const Var<T>& weight, int stride, int padding);

// Mean over 2x2 blocks. An odd height or width is first extended by
// reflecting the last-but-one row/column.
template <typename T> Var<T> avg_pool2(const Var<T>& x);

// Per-(n, c) normalisation to zero mean and unit variance (biased estimator).
template <typename T> Var<T> instance_norm(const Var<T>& x, T eps = T(1e-5));

// x + gamma * a with gamma of shape (1,1,1,1). When gamma is exactly zero the
// output is a bit copy of x.
template <typename T> Var<T> gated_residual(const Var<T>& x, const Var<T>& gamma, const Var<T>& a);

// weight / sigma with sigma = u^T W v for W = weight viewed (c_out, rest).
// u and v are treated as constants; `sigma_out` receives the estimate.
template <typename T>
Var<T> spectral_scale(const Var<T>& weight, const std::vector<T>& u, const std::vector<T>& v,
                      T* sigma_out = nullptr);

// Spatial output extent of conv2d.
inline int64_t conv_out_size(int64_t in, int64_t k, int stride, int padding) {
  return (in + 2 * padding - k) / stride + 1;
}
inline int64_t conv_transpose_out_size(int64_t in, int64_t k, int stride, int padding) {
  return (in - 1) * stride - 2 * padding + k;
}

}  // namespace cmgan
