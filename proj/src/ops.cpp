// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "cmgan/error.hpp"
#include "cmgan/log.hpp"

namespace cmgan {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

std::string shapes_msg(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str();
}

template <typename T>
bool is_scalar(const Tensor<T>& t) {
  return t.size() == 1;
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T, typename F, typename D>
Var<T> unary(const char* name, const Var<T>& x, F f, D dfdx) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  const T* in = xv.raw();
  T* o = out.raw();
  for (size_t i = 0; i < xv.size(); ++i) o[i] = f(in[i]);
  NodeId xid = x.id();
  return x.graph().record(name, std::move(out), {x},
                          [xid, dfdx](Graph<T>& g, const Tensor<T>& y, const Tensor<T>& gy) {
                            Tensor<T>* gx = g.grad_of(xid);
                            if (!gx) return;
                            const T* xin = g.value(xid).raw();
                            T* d = gx->raw();
                            for (size_t i = 0; i < y.size(); ++i) d[i] += gy[i] * dfdx(xin[i], y[i]);
                          });
}

// F: (a, b) -> out. DA/DB: (a, b, out) -> partial derivative.
template <typename T, typename F, typename DA, typename DB>
Var<T> binary(const char* name, const Var<T>& a, const Var<T>& b, F f, DA da, DB db) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const bool a_bcast = av.shape() != bv.shape() && is_scalar(av);
  const bool b_bcast = av.shape() != bv.shape() && is_scalar(bv);
  if (av.shape() != bv.shape() && !a_bcast && !b_bcast)
    throw DimensionError(shapes_msg(name, av.shape(), bv.shape()));
  const Shape shape = a_bcast ? bv.shape() : av.shape();
  const size_t n = static_cast<size_t>(shape.numel());
  Tensor<T> out(shape);
  for (size_t i = 0; i < n; ++i) {
    T x = av[a_bcast ? 0 : i];
    T y = bv[b_bcast ? 0 : i];
    out[i] = f(x, y);
  }
  NodeId aid = a.id(), bid = b.id();
  return a.graph().record(
      name, std::move(out), {a, b},
      [=](Graph<T>& g, const Tensor<T>& o, const Tensor<T>& go) {
        const Tensor<T>& A = g.value(aid);
        const Tensor<T>& B = g.value(bid);
        if (Tensor<T>* ga = g.grad_of(aid)) {
          for (size_t i = 0; i < n; ++i) {
            T x = A[a_bcast ? 0 : i], y = B[b_bcast ? 0 : i];
            (*ga)[a_bcast ? 0 : i] += go[i] * da(x, y, o[i]);
          }
        }
        if (Tensor<T>* gb = g.grad_of(bid)) {
          for (size_t i = 0; i < n; ++i) {
            T x = A[a_bcast ? 0 : i], y = B[b_bcast ? 0 : i];
            (*gb)[b_bcast ? 0 : i] += go[i] * db(x, y, o[i]);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Convolution helpers

struct ConvGeom {
  int64_t c, h, w;     // input image
  int64_t k;           // square kernel
  int stride, pad;
  int64_t oh, ow;      // output image
  int64_t rows() const { return c * k * k; }
  int64_t cols() const { return oh * ow; }
};

template <typename T>
void im2col(const T* in, const ConvGeom& g, T* col) {
  const int64_t plane = g.cols();
  for (int64_t c = 0; c < g.c; ++c)
    for (int64_t ki = 0; ki < g.k; ++ki)
      for (int64_t kj = 0; kj < g.k; ++kj) {
        T* dst = col + ((c * g.k + ki) * g.k + kj) * plane;
        for (int64_t oy = 0; oy < g.oh; ++oy) {
          int64_t iy = oy * g.stride - g.pad + ki;
          T* row = dst + oy * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(row, row + g.ow, T(0));
            continue;
          }
          const T* src = in + (c * g.h + iy) * g.w;
          for (int64_t ox = 0; ox < g.ow; ++ox) {
            int64_t ix = ox * g.stride - g.pad + kj;
            row[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
}

template <typename T>
void col2im(const T* col, const ConvGeom& g, T* img) {
  const int64_t plane = g.cols();
  for (int64_t c = 0; c < g.c; ++c)
    for (int64_t ki = 0; ki < g.k; ++ki)
      for (int64_t kj = 0; kj < g.k; ++kj) {
        const T* src = col + ((c * g.k + ki) * g.k + kj) * plane;
        for (int64_t oy = 0; oy < g.oh; ++oy) {
          int64_t iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.h) continue;
          T* dst = img + (c * g.h + iy) * g.w;
          const T* row = src + oy * g.ow;
          for (int64_t ox = 0; ox < g.ow; ++ox) {
            int64_t ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.w) dst[ix] += row[ox];
          }
        }
      }
}

bool is_pointwise(const ConvGeom& g) { return g.k == 1 && g.stride == 1 && g.pad == 0; }

void check_conv_args(const char* op, int stride, int padding) {
  if (stride < 1) throw ConfigError(std::string(op) + ": stride must be >= 1");
  if (padding < 0) throw ConfigError(std::string(op) + ": padding must be >= 0");
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(1); });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(-1); });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
      [](T x, T, T) { return x; });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
      [](T, T y, T o) { return -o / y; });
}

template <typename T>
Var<T> scale(const Var<T>& x, T k) {
  return unary<T>(
      "scale", x, [k](T v) { return k * v; }, [k](T, T) { return k; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T k) {
  return unary<T>(
      "add_scalar", x, [k](T v) { return v + k; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> abs(const Var<T>& x) {
  return unary<T>(
      "abs", x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > 0 ? T(1) : v < 0 ? T(-1) : T(0); });
}

template <typename T>
Var<T> square(const Var<T>& x) {
  return unary<T>(
      "square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return unary<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary<T>(
      "relu", x, [](T v) { return v > 0 ? v : T(0); },
      [](T v, T) { return v > 0 ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T alpha) {
  return unary<T>(
      "leaky_relu", x, [alpha](T v) { return v > 0 ? v : alpha * v; },
      [alpha](T v, T) { return v > 0 ? T(1) : alpha; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= 0) return T(1) / (T(1) + std::exp(-v));
        T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> log(const Var<T>& x) {
  for (T v : x.value().data())
    if (!(v > 0)) throw DomainError("log of non-positive value " + std::to_string(v));
  return unary<T>(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Var<T> log_sigmoid(const Var<T>& x) {
  return unary<T>(
      "log_sigmoid", x,
      [](T v) { return std::min(v, T(0)) - std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) {
        // sigmoid(-v)
        if (v >= 0) {
          T e = std::exp(-v);
          return e / (T(1) + e);
        }
        return T(1) / (T(1) + std::exp(v));
      });
}

template <typename T>
Var<T> pow_pos(const Var<T>& x, T p) {
  if (!(p > 0)) throw DomainError("pow_pos requires a positive exponent");
  return unary<T>(
      "pow_pos", x, [p](T v) { return v > 0 ? std::pow(v, p) : T(0); },
      [p](T v, T) { return v > 0 ? p * std::pow(v, p - T(1)) : T(0); });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Var<T> sum(const Var<T>& x, unsigned axes) {
  const Tensor<T>& xv = x.value();
  const Shape s = xv.shape();
  if (s.numel() == 0) throw DomainError("reduction over an empty tensor");
  Shape os{(axes & Axes::kN) ? 1 : s.n, (axes & Axes::kC) ? 1 : s.c, (axes & Axes::kH) ? 1 : s.h,
           (axes & Axes::kW) ? 1 : s.w};
  // Maps every input offset onto its output offset.
  auto out_index = [s, os](int64_t n, int64_t c, int64_t h, int64_t w) {
    int64_t on = os.n == 1 ? 0 : n, oc = os.c == 1 ? 0 : c, oh = os.h == 1 ? 0 : h,
            ow = os.w == 1 ? 0 : w;
    return static_cast<size_t>(((on * os.c + oc) * os.h + oh) * os.w + ow);
  };
  Tensor<T> out(os);
  size_t i = 0;
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t c = 0; c < s.c; ++c)
      for (int64_t h = 0; h < s.h; ++h)
        for (int64_t w = 0; w < s.w; ++w) out[out_index(n, c, h, w)] += xv[i++];
  NodeId xid = x.id();
  return x.graph().record("sum", std::move(out), {x},
                          [xid, s, out_index](Graph<T>& g, const Tensor<T>&, const Tensor<T>& go) {
                            Tensor<T>* gx = g.grad_of(xid);
                            if (!gx) return;
                            size_t k = 0;
                            for (int64_t n = 0; n < s.n; ++n)
                              for (int64_t c = 0; c < s.c; ++c)
                                for (int64_t h = 0; h < s.h; ++h)
                                  for (int64_t w = 0; w < s.w; ++w)
                                    (*gx)[k++] += go[out_index(n, c, h, w)];
                          });
}

template <typename T>
Var<T> mean(const Var<T>& x, unsigned axes) {
  const Shape s = x.shape();
  if (s.numel() == 0) throw DomainError("reduction over an empty tensor");
  int64_t count = 1;
  for (int a = 0; a < 4; ++a)
    if (axes & (1u << a)) count *= s[a];
  return scale(sum(x, axes), T(1) / static_cast<T>(count));
}

template <typename T>
Var<T> softmax(const Var<T>& x, int axis) {
  if (axis < 0 || axis > 3) throw DimensionError("softmax: axis must be in [0, 3]");
  const Tensor<T>& xv = x.value();
  const Shape s = xv.shape();
  const int64_t len = s[axis];
  int64_t inner = 1;
  for (int a = axis + 1; a < 4; ++a) inner *= s[a];
  const int64_t outer = len == 0 ? 0 : s.numel() / (len * inner);
  Tensor<T> out(s);
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t in = 0; in < inner; ++in) {
      const size_t base = static_cast<size_t>(o * len * inner + in);
      T mx = xv[base];
      for (int64_t j = 1; j < len; ++j) mx = std::max(mx, xv[base + j * inner]);
      T total = 0;
      for (int64_t j = 0; j < len; ++j) {
        T e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (int64_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  NodeId xid = x.id();
  return x.graph().record(
      "softmax", std::move(out), {x},
      [=](Graph<T>& g, const Tensor<T>& y, const Tensor<T>& go) {
        Tensor<T>* gx = g.grad_of(xid);
        if (!gx) return;
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t in = 0; in < inner; ++in) {
            const size_t base = static_cast<size_t>(o * len * inner + in);
            T dot = 0;
            for (int64_t j = 0; j < len; ++j) dot += go[base + j * inner] * y[base + j * inner];
            for (int64_t j = 0; j < len; ++j) {
              size_t k = base + j * inner;
              (*gx)[k] += y[k] * (go[k] - dot);
            }
          }
      });
}

// ---------------------------------------------------------------------------
// Shape ops and matrix products

template <typename T>
Var<T> batched_matmul(const Var<T>& a, const Var<T>& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.n != sb.n || sa.c != sb.c || sa.w != sb.h)
    throw DimensionError(shapes_msg("batched_matmul", sa, sb));
  const int64_t p = sa.h, q = sa.w, r = sb.w, batches = sa.n * sa.c;
  Tensor<T> out(Shape{sa.n, sa.c, p, r});
  for (int64_t i = 0; i < batches; ++i) {
    ConstMatMap<T> A(a.value().raw() + i * p * q, p, q);
    ConstMatMap<T> B(b.value().raw() + i * q * r, q, r);
    MatMap<T> C(out.raw() + i * p * r, p, r);
    C.noalias() = A * B;
  }
  NodeId aid = a.id(), bid = b.id();
  return a.graph().record(
      "batched_matmul", std::move(out), {a, b},
      [=](Graph<T>& g, const Tensor<T>&, const Tensor<T>& go) {
        Tensor<T>* ga = g.grad_of(aid);
        Tensor<T>* gb = g.grad_of(bid);
        for (int64_t i = 0; i < batches; ++i) {
          ConstMatMap<T> G(go.raw() + i * p * r, p, r);
          if (ga) {
            ConstMatMap<T> B(g.value(bid).raw() + i * q * r, q, r);
            MatMap<T>(ga->raw() + i * p * q, p, q).noalias() += G * B.transpose();
          }
          if (gb) {
            ConstMatMap<T> A(g.value(aid).raw() + i * p * q, p, q);
            MatMap<T>(gb->raw() + i * q * r, q, r).noalias() += A.transpose() * G;
          }
        }
      });
}

template <typename T>
Var<T> gram(const Var<T>& x) {
  const Shape s = x.shape();
  const int64_t d = s.c, hw = s.h * s.w;
  Tensor<T> out(Shape{s.n, 1, d, d});
  for (int64_t n = 0; n < s.n; ++n) {
    ConstMatMap<T> F(x.value().raw() + n * d * hw, d, hw);
    MatMap<T> G(out.raw() + n * d * d, d, d);
    G.noalias() = F * F.transpose();
    G.template triangularView<Eigen::StrictlyUpper>() = G.transpose();
  }
  NodeId xid = x.id();
  return x.graph().record("gram", std::move(out), {x},
                          [=](Graph<T>& g, const Tensor<T>&, const Tensor<T>& go) {
                            Tensor<T>* gx = g.grad_of(xid);
                            if (!gx) return;
                            for (int64_t n = 0; n < s.n; ++n) {
                              ConstMatMap<T> G(go.raw() + n * d * d, d, d);
                              ConstMatMap<T> F(g.value(xid).raw() + n * d * hw, d, hw);
                              RowMat<T> sym = G + G.transpose();
                              MatMap<T>(gx->raw() + n * d * hw, d, hw).noalias() += sym * F;
                            }
                          });
}

template <typename T>
Var<T> transpose_hw(const Var<T>& x) {
  const Shape s = x.shape();
  const int64_t batches = s.n * s.c;
  Tensor<T> out(Shape{s.n, s.c, s.w, s.h});
  for (int64_t i = 0; i < batches; ++i) {
    ConstMatMap<T> X(x.value().raw() + i * s.h * s.w, s.h, s.w);
    MatMap<T>(out.raw() + i * s.h * s.w, s.w, s.h) = X.transpose();
  }
  NodeId xid = x.id();
  return x.graph().record("transpose_hw", std::move(out), {x},
                          [=](Graph<T>& g, const Tensor<T>&, const Tensor<T>& go) {
                            Tensor<T>* gx = g.grad_of(xid);
                            if (!gx) return;
                            for (int64_t i = 0; i < batches; ++i) {
                              ConstMatMap<T> G(go.raw() + i * s.h * s.w, s.w, s.h);
                              MatMap<T>(gx->raw() + i * s.h * s.w, s.h, s.w) += G.transpose();
                            }
                          });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape s) {
  Tensor<T> out = x.value().reshaped(s);
  NodeId xid = x.id();
  return x.graph().record("reshape", std::move(out), {x},
                          [xid](Graph<T>& g, const Tensor<T>&, const Tensor<T>& go) {
                            Tensor<T>* gx = g.grad_of(xid);
                            if (!gx) return;
                            for (size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i];
                          });
}

// ---------------------------------------------------------------------------
// Convolutions

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const std::optional<std::type_identity_t<Var<T>>>& bias, int stride,
              int padding) {
  check_conv_args("conv2d", stride, padding);
  const Shape sx = x.shape(), sw = weight.shape();
  if (sw.h != sw.w || sw.c != sx.c)
    throw DimensionError(shapes_msg("conv2d (input vs weight)", sx, sw));
  if (bias && bias->shape() != Shape{1, sw.n, 1, 1})
    throw DimensionError(shapes_msg("conv2d (bias)", bias->shape(), Shape{1, sw.n, 1, 1}));
  const ConvGeom geo{sx.c, sx.h, sx.w, sw.h, stride, padding,
                     conv_out_size(sx.h, sw.h, stride, padding),
                     conv_out_size(sx.w, sw.w, stride, padding)};
  if (geo.oh < 1 || geo.ow < 1)
    throw DimensionError(shapes_msg("conv2d (input smaller than kernel)", sx, sw));
  const int64_t c_out = sw.n;
  const bool pointwise = is_pointwise(geo);
  Tensor<T> out(Shape{sx.n, c_out, geo.oh, geo.ow});
  std::vector<T> col(pointwise ? 0 : static_cast<size_t>(geo.rows() * geo.cols()));
  ConstMatMap<T> W(weight.value().raw(), c_out, geo.rows());
  for (int64_t n = 0; n < sx.n; ++n) {
    const T* img = x.value().raw() + n * sx.c * sx.h * sx.w;
    if (!pointwise) im2col(img, geo, col.data());
    ConstMatMap<T> C(pointwise ? img : col.data(), geo.rows(), geo.cols());
    MatMap<T> O(out.raw() + n * c_out * geo.cols(), c_out, geo.cols());
    O.noalias() = W * C;
    if (bias) {
      const T* b = bias->value().raw();
      for (int64_t co = 0; co < c_out; ++co) O.row(co).array() += b[co];
    }
  }
  NodeId xid = x.id(), wid = weight.id();
  std::optional<NodeId> bid;
  if (bias) bid = bias->id();
  auto backward = [=](Graph<T>& g, const Tensor<T>&, const Tensor<T>& go) {
    Tensor<T>* gx = g.grad_of(xid);
    Tensor<T>* gw = g.grad_of(wid);
    Tensor<T>* gb = bid ? g.grad_of(*bid) : nullptr;
    const Tensor<T>& xv = g.value(xid);
    ConstMatMap<T> Wm(g.value(wid).raw(), c_out, geo.rows());
    std::vector<T> col_buf(pointwise ? 0 : static_cast<size_t>(geo.rows() * geo.cols()));
    std::vector<T> dcol(gx && !pointwise ? static_cast<size_t>(geo.rows() * geo.cols()) : 0);
    for (int64_t n = 0; n < sx.n; ++n) {
      ConstMatMap<T> G(go.raw() + n * c_out * geo.cols(), c_out, geo.cols());
      const T* img = xv.raw() + n * sx.c * sx.h * sx.w;
      if (gw) {
        if (!pointwise) im2col(img, geo, col_buf.data());
        ConstMatMap<T> C(pointwise ? img : col_buf.data(), geo.rows(), geo.cols());
        MatMap<T>(gw->raw(), c_out, geo.rows()).noalias() += G * C.transpose();
      }
      if (gb) {
        for (int64_t co = 0; co < c_out; ++co) (*gb)[static_cast<size_t>(co)] += G.row(co).sum();
      }
      if (gx) {
        T* dimg = gx->raw() + n * sx.c * sx.h * sx.w;
        if (pointwise) {
          MatMap<T>(dimg, geo.rows(), geo.cols()).noalias() += Wm.transpose() * G;
        } else {
          MatMap<T>(dcol.data(), geo.rows(), geo.cols()).noalias() = Wm.transpose() * G;
          col2im(dcol.data(), geo, dimg);
        }
      }
    }
  };
  if (bias) return x.graph().record("conv2d", std::move(out), {x, weight, *bias}, backward);
  return x.graph().record("conv2d", std::move(out), {x, weight}, backward);
}

template <typename T>
Var<T> conv2d_transpose(const Var<T>& x, const Var<T>& weight, int stride, int padding) {
  check_conv_args("conv2d_transpose", stride, padding);
  const Shape sx = x.shape(), sw = weight.shape();
  if (sw.h != sw.w || sw.n != sx.c)
    throw DimensionError(shapes_msg("conv2d_transpose (input vs weight)", sx, sw));
  // Geometry of the conv2d this op is the adjoint of: its input is our output.
  const int64_t oh = conv_transpose_out_size(sx.h, sw.h, stride, padding);
  const int64_t ow = conv_transpose_out_size(sx.w, sw.w, stride, padding);
  if (oh < 1 || ow < 1) throw DimensionError(shapes_msg("conv2d_transpose", sx, sw));
  const ConvGeom geo{sw.c, oh, ow, sw.h, stride, padding, sx.h, sx.w};
  if (conv_out_size(oh, sw.h, stride, padding) != sx.h ||
      conv_out_size(ow, sw.w, stride, padding) != sx.w)
    throw DimensionError(shapes_msg("conv2d_transpose (no exact inverse)", sx, sw));
  const int64_t c_in = sw.n;  // channels consumed
  const int64_t c_out = sw.c;
  Tensor<T> out(Shape{sx.n, c_out, oh, ow});
  std::vector<T> col(static_cast<size_t>(geo.rows() * geo.cols()));
  ConstMatMap<T> W(weight.value().raw(), c_in, geo.rows());
  for (int64_t n = 0; n < sx.n; ++n) {
    ConstMatMap<T> X(x.value().raw() + n * c_in * geo.cols(), c_in, geo.cols());
    MatMap<T>(col.data(), geo.rows(), geo.cols()).noalias() = W.transpose() * X;
    col2im(col.data(), geo, out.raw() + n * c_out * oh * ow);
  }
  NodeId xid = x.id(), wid = weight.id();
  return x.graph().record(
      "conv2d_transpose", std::move(out), {x, weight},
      [=](Graph<T>& g, const Tensor<T>&, const Tensor<T>& go) {
        Tensor<T>* gx = g.grad_of(xid);
        Tensor<T>* gw = g.grad_of(wid);
        ConstMatMap<T> Wm(g.value(wid).raw(), c_in, geo.rows());
        std::vector<T> gcol(static_cast<size_t>(geo.rows() * geo.cols()));
        for (int64_t n = 0; n < sx.n; ++n) {
          im2col(go.raw() + n * c_out * oh * ow, geo, gcol.data());
          ConstMatMap<T> GC(gcol.data(), geo.rows(), geo.cols());
          if (gx) MatMap<T>(gx->raw() + n * c_in * geo.cols(), c_in, geo.cols()).noalias() += Wm * GC;
          if (gw) {
            ConstMatMap<T> X(g.value(xid).raw() + n * c_in * geo.cols(), c_in, geo.cols());
            MatMap<T>(gw->raw(), c_in, geo.rows()).noalias() += X * GC.transpose();
          }
        }
      });
}

template <typename T>
Var<T> avg_pool2(const Var<T>& x) {
  const Shape s = x.shape();
  if (s.h < 2 || s.w < 2) throw DomainError("avg_pool2 needs height and width >= 2, got " + s.str());
  const int64_t oh = (s.h + 1) / 2, ow = (s.w + 1) / 2;
  // Reflect index past the last row/column back inside.
  auto ry = [h = s.h](int64_t y) { return y < h ? y : 2 * h - 2 - y; };
  auto rx = [w = s.w](int64_t v) { return v < w ? v : 2 * w - 2 - v; };
  Tensor<T> out(Shape{s.n, s.c, oh, ow});
  const Tensor<T>& xv = x.value();
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    const T* src = xv.raw() + p * s.h * s.w;
    T* dst = out.raw() + p * oh * ow;
    for (int64_t y = 0; y < oh; ++y)
      for (int64_t v = 0; v < ow; ++v) {
        int64_t y0 = ry(2 * y), y1 = ry(2 * y + 1), x0 = rx(2 * v), x1 = rx(2 * v + 1);
        dst[y * ow + v] = (src[y0 * s.w + x0] + src[y0 * s.w + x1] + src[y1 * s.w + x0] +
                           src[y1 * s.w + x1]) *
                          T(0.25);
      }
  }
  NodeId xid = x.id();
  return x.graph().record("avg_pool2", std::move(out), {x},
                          [=](Graph<T>& g, const Tensor<T>&, const Tensor<T>& go) {
                            Tensor<T>* gx = g.grad_of(xid);
                            if (!gx) return;
                            for (int64_t p = 0; p < s.n * s.c; ++p) {
                              T* d = gx->raw() + p * s.h * s.w;
                              const T* gp = go.raw() + p * oh * ow;
                              for (int64_t y = 0; y < oh; ++y)
                                for (int64_t v = 0; v < ow; ++v) {
                                  T q = gp[y * ow + v] * T(0.25);
                                  int64_t y0 = ry(2 * y), y1 = ry(2 * y + 1);
                                  int64_t x0 = rx(2 * v), x1 = rx(2 * v + 1);
                                  d[y0 * s.w + x0] += q;
                                  d[y0 * s.w + x1] += q;
                                  d[y1 * s.w + x0] += q;
                                  d[y1 * s.w + x1] += q;
                                }
                            }
                          });
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps) {
  const Shape s = x.shape();
  const int64_t plane = s.h * s.w;
  if (plane == 0) throw DomainError("instance_norm over an empty plane");
  Tensor<T> out(s);
  std::vector<T> inv_std(static_cast<size_t>(s.n * s.c));
  const Tensor<T>& xv = x.value();
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    const T* src = xv.raw() + p * plane;
    T mu = 0;
    for (int64_t i = 0; i < plane; ++i) mu += src[i];
    mu /= static_cast<T>(plane);
    T var = 0;
    for (int64_t i = 0; i < plane; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<T>(plane);
    T is = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(p)] = is;
    T* dst = out.raw() + p * plane;
    for (int64_t i = 0; i < plane; ++i) dst[i] = (src[i] - mu) * is;
  }
  NodeId xid = x.id();
  return x.graph().record(
      "instance_norm", std::move(out), {x},
      [=, inv_std = std::move(inv_std)](Graph<T>& g, const Tensor<T>& y, const Tensor<T>& go) {
        Tensor<T>* gx = g.grad_of(xid);
        if (!gx) return;
        for (int64_t p = 0; p < s.n * s.c; ++p) {
          const T* gy = go.raw() + p * plane;
          const T* yy = y.raw() + p * plane;
          T mg = 0, mgy = 0;
          for (int64_t i = 0; i < plane; ++i) {
            mg += gy[i];
            mgy += gy[i] * yy[i];
          }
          mg /= static_cast<T>(plane);
          mgy /= static_cast<T>(plane);
          T* d = gx->raw() + p * plane;
          T is = inv_std[static_cast<size_t>(p)];
          for (int64_t i = 0; i < plane; ++i) d[i] += is * (gy[i] - mg - yy[i] * mgy);
        }
      });
}

template <typename T>
Var<T> gated_residual(const Var<T>& x, const Var<T>& gamma, const Var<T>& a) {
  if (x.shape() != a.shape()) throw DimensionError(shapes_msg("gated_residual", x.shape(), a.shape()));
  if (gamma.value().size() != 1)
    throw DimensionError(shapes_msg("gated_residual (gamma)", gamma.shape(), Shape{1, 1, 1, 1}));
  const T gm = gamma.value()[0];
  Tensor<T> out = x.value();
  if (gm != T(0)) {
    const T* av = a.value().raw();
    for (size_t i = 0; i < out.size(); ++i) out[i] += gm * av[i];
  }
  NodeId xid = x.id(), gid = gamma.id(), aid = a.id();
  return x.graph().record("gated_residual", std::move(out), {x, gamma, a},
                          [=](Graph<T>& g, const Tensor<T>&, const Tensor<T>& go) {
                            const T gval = g.value(gid)[0];
                            const Tensor<T>& av = g.value(aid);
                            if (Tensor<T>* gx = g.grad_of(xid))
                              for (size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i];
                            if (Tensor<T>* gg = g.grad_of(gid)) {
                              T acc = 0;
                              for (size_t i = 0; i < go.size(); ++i) acc += go[i] * av[i];
                              (*gg)[0] += acc;
                            }
                            if (Tensor<T>* ga = g.grad_of(aid))
                              for (size_t i = 0; i < go.size(); ++i) (*ga)[i] += gval * go[i];
                          });
}

template <typename T>
Var<T> spectral_scale(const Var<T>& weight, const std::vector<T>& u, const std::vector<T>& v,
                      T* sigma_out) {
  const Shape sw = weight.shape();
  const int64_t rows = sw.n, cols = sw.c * sw.h * sw.w;
  if (static_cast<int64_t>(u.size()) != rows || static_cast<int64_t>(v.size()) != cols)
    throw DimensionError("spectral_scale: singular vector sizes do not match weight " + sw.str());
  ConstMatMap<T> W(weight.value().raw(), rows, cols);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> U(u.data(), rows), V(v.data(), cols);
  T sigma = U.dot(W * V);
  if (std::abs(sigma) < T(1e-12)) {
    warn("spectral_scale: singular value estimate below 1e-12; flooring");
    sigma = T(1e-12);
  }
  if (sigma_out) *sigma_out = sigma;
  Tensor<T> out(sw);
  MatMap<T>(out.raw(), rows, cols) = W / sigma;
  NodeId wid = weight.id();
  return weight.graph().record(
      "spectral_scale", std::move(out), {weight},
      [=](Graph<T>& g, const Tensor<T>&, const Tensor<T>& go) {
        Tensor<T>* gw = g.grad_of(wid);
        if (!gw) return;
        ConstMatMap<T> Wm(g.value(wid).raw(), rows, cols);
        ConstMatMap<T> G(go.raw(), rows, cols);
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> Uv(u.data(), rows), Vv(v.data(), cols);
        const T gw_dot = (G.array() * Wm.array()).sum();
        MatMap<T> D(gw->raw(), rows, cols);
        D += G / sigma;
        D.noalias() -= (gw_dot / (sigma * sigma)) * (Uv * Vv.transpose());
      });
}

#define CMGAN_INSTANTIATE_OPS(T)                                                             \
  template Var<T> add(const Var<T>&, const Var<T>&);                                        \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                        \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                        \
  template Var<T> div(const Var<T>&, const Var<T>&);                                        \
  template Var<T> scale(const Var<T>&, T);                                                  \
  template Var<T> add_scalar(const Var<T>&, T);                                             \
  template Var<T> abs(const Var<T>&);                                                       \
  template Var<T> square(const Var<T>&);                                                    \
  template Var<T> tanh(const Var<T>&);                                                      \
  template Var<T> relu(const Var<T>&);                                                      \
  template Var<T> leaky_relu(const Var<T>&, T);                                             \
  template Var<T> sigmoid(const Var<T>&);                                                   \
  template Var<T> log(const Var<T>&);                                                       \
  template Var<T> log_sigmoid(const Var<T>&);                                               \
  template Var<T> pow_pos(const Var<T>&, T);                                                \
  template Var<T> sum(const Var<T>&, unsigned);                                             \
  template Var<T> mean(const Var<T>&, unsigned);                                            \
  template Var<T> softmax(const Var<T>&, int);                                              \
  template Var<T> batched_matmul(const Var<T>&, const Var<T>&);                             \
  template Var<T> gram(const Var<T>&);                                                      \
  template Var<T> transpose_hw(const Var<T>&);                                              \
  template Var<T> reshape(const Var<T>&, Shape);                                            \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const std::optional<std::type_identity_t<Var<T>>>&, int, int); \
  template Var<T> conv2d_transpose(const Var<T>&, const Var<T>&, int, int);                 \
  template Var<T> avg_pool2(const Var<T>&);                                                 \
  template Var<T> instance_norm(const Var<T>&, T);                                          \
  template Var<T> gated_residual(const Var<T>&, const Var<T>&, const Var<T>&);              \
  template Var<T> spectral_scale(const Var<T>&, const std::vector<T>&, const std::vector<T>&, T*);

CMGAN_INSTANTIATE_OPS(float)
CMGAN_INSTANTIATE_OPS(double)

}  // namespace cmgan
