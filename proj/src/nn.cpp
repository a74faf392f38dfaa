// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/nn.hpp"

#include <cmath>
#include <cstring>

#include "cmgan/error.hpp"
#include "cmgan/log.hpp"

namespace cmgan {
namespace {

template <typename T>
Parameter<T> make_param(std::string name, Shape s) {
  Parameter<T> p{std::move(name), Tensor<T>(s), Tensor<T>(s)};
  return p;
}

template <typename T>
T normalize_into(std::vector<T>& dst, const std::vector<T>& src) {
  T norm = 0;
  for (T v : src) norm += v * v;
  norm = std::sqrt(norm);
  if (norm < T(1e-12)) return norm;
  for (size_t i = 0; i < src.size(); ++i) dst[i] = src[i] / norm;
  return norm;
}

template <typename T>
void random_unit(std::vector<T>& u, Rng& rng) {
  T norm = 0;
  for (auto& e : u) {
    e = static_cast<T>(rng.normal());
    norm += e * e;
  }
  norm = std::sqrt(norm);
  for (auto& e : u) e /= norm;
}

}  // namespace

// ---------------------------------------------------------------------------
// Spectral normalisation

template <typename T>
SpectralEstimate<T> power_iterate(SpectralNormState<T>& state, const Tensor<T>& weight, int iterations) {
  const Shape s = weight.shape();
  const size_t rows = static_cast<size_t>(s.n);
  const size_t cols = static_cast<size_t>(s.c * s.h * s.w);
  if (state.u.size() != rows) {
    state.u.assign(rows, T(0));
    if (rows) state.u[0] = T(1);
  }
  const T* w = weight.raw();
  std::vector<T> wt_u(cols), w_v(rows);
  SpectralEstimate<T> est;
  est.v.assign(cols, T(0));
  auto refresh_v = [&] {
    std::fill(wt_u.begin(), wt_u.end(), T(0));
    for (size_t i = 0; i < rows; ++i) {
      const T ui = state.u[i];
      const T* row = w + i * cols;
      for (size_t j = 0; j < cols; ++j) wt_u[j] += row[j] * ui;
    }
    if (normalize_into(est.v, wt_u) < T(1e-12)) std::fill(est.v.begin(), est.v.end(), T(0));
  };
  auto apply_w = [&] {
    for (size_t i = 0; i < rows; ++i) {
      const T* row = w + i * cols;
      T acc = 0;
      for (size_t j = 0; j < cols; ++j) acc += row[j] * est.v[j];
      w_v[i] = acc;
    }
  };
  for (int it = 0; it < iterations; ++it) {
    refresh_v();
    apply_w();
    // A vanishing W v keeps the previous (unit) u.
    normalize_into(state.u, w_v);
  }
  refresh_v();
  apply_w();
  T sigma = 0;
  for (size_t i = 0; i < rows; ++i) sigma += state.u[i] * w_v[i];
  est.sigma = sigma;
  return est;
}

template <typename T>
Tensor<T> spectral_normalize(SpectralNormState<T>& state, const Tensor<T>& weight, int iterations,
                             T* sigma_out) {
  SpectralEstimate<T> est = power_iterate(state, weight, iterations);
  T sigma = est.sigma;
  if (std::abs(sigma) < T(1e-12)) {
    warn("spectral_normalize: singular value estimate below 1e-12; flooring");
    sigma = T(1e-12);
  }
  if (sigma_out) *sigma_out = sigma;
  Tensor<T> out = weight;
  for (T& v : out.data()) v /= sigma;
  return out;
}

// ---------------------------------------------------------------------------
// Layers

template <typename T>
Conv2d<T>::Conv2d(std::string name, int64_t c_in, int64_t c_out, int kernel, int stride_, int padding_,
                  bool with_bias, bool spectral_norm)
    : weight(make_param<T>(name + ".weight", Shape{c_out, c_in, kernel, kernel})),
      stride(stride_),
      padding(padding_) {
  if (with_bias) bias = make_param<T>(name + ".bias", Shape{1, c_out, 1, 1});
  if (spectral_norm) spectral = SpectralNormState<T>{};
}

template <typename T>
Var<T> Conv2d<T>::forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt) {
  Var<T> w = bind(g, weight, opt.train_params);
  if (spectral) {
    SpectralEstimate<T> est =
        power_iterate(*spectral, weight.value, opt.update_spectral ? opt.spectral_iterations : 0);
    w = spectral_scale(w, spectral->u, est.v);
  }
  std::optional<Var<T>> b;
  if (bias) b = bind(g, *bias, opt.train_params);
  return conv2d(x, w, b, stride, padding);
}

template <typename T>
void Conv2d<T>::collect(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight);
  if (bias) out.push_back(&*bias);
}

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(std::string name, int64_t c_in, int64_t c_out, int kernel,
                                    int stride_, int padding_)
    : weight(make_param<T>(name + ".weight", Shape{c_in, c_out, kernel, kernel})),
      stride(stride_),
      padding(padding_) {}

template <typename T>
Var<T> ConvTranspose2d<T>::forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt) {
  return conv2d_transpose(x, bind(g, weight, opt.train_params), stride, padding);
}

template <typename T>
void ConvTranspose2d<T>::collect(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight);
}

template <typename T>
ResidualBlock<T>::ResidualBlock(const std::string& name, int64_t channels)
    : conv1_(name + ".conv1", channels, channels, 3, 1, 1), conv2_(name + ".conv2", channels, channels, 3, 1, 1) {}

template <typename T>
Var<T> ResidualBlock<T>::forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt) {
  Var<T> h = relu(instance_norm(conv1_.forward(g, x, opt)));
  h = instance_norm(conv2_.forward(g, h, opt));
  return add(x, h);
}

template <typename T>
void ResidualBlock<T>::collect(std::vector<Parameter<T>*>& out) {
  conv1_.collect(out);
  conv2_.collect(out);
}

template <typename T>
SelfAttentionBlock<T>::SelfAttentionBlock(const std::string& name, int64_t c, bool spectral)
    : channels(c) {
  if (c <= 0 || c % kReduction != 0)
    throw ConfigError("self-attention at " + name + ": channel count " + std::to_string(c) +
                      " is not divisible by " + std::to_string(kReduction));
  query = Conv2d<T>(name + ".query", c, c / kReduction, 1, 1, 0, true, spectral);
  key = Conv2d<T>(name + ".key", c, c / kReduction, 1, 1, 0, true, spectral);
  value = Conv2d<T>(name + ".value", c, c, 1, 1, 0, true, spectral);
  gamma = make_param<T>(name + ".gamma", Shape{1, 1, 1, 1});
}

template <typename T>
Var<T> SelfAttentionBlock<T>::forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt,
                                      Var<T>* attention_out) {
  const Shape s = x.shape();
  if (s.c != channels)
    throw DimensionError("self-attention expects " + std::to_string(channels) + " channels, got " + s.str());
  const int64_t n = s.n, positions = s.h * s.w, reduced = channels / kReduction;
  Var<T> q = reshape(query.forward(g, x, opt), Shape{n, 1, reduced, positions});
  Var<T> k = reshape(key.forward(g, x, opt), Shape{n, 1, reduced, positions});
  Var<T> v = reshape(value.forward(g, x, opt), Shape{n, 1, channels, positions});
  // energy[i][j] = q_i . k_j; each row i is normalised over the positions j.
  Var<T> attention = softmax(batched_matmul(transpose_hw(q), k), 3);
  if (attention_out) *attention_out = attention;
  Var<T> attended = reshape(batched_matmul(v, transpose_hw(attention)), s);
  return gated_residual(x, bind(g, gamma, opt.train_params), attended);
}

template <typename T>
void SelfAttentionBlock<T>::collect(std::vector<Parameter<T>*>& out) {
  query.collect(out);
  key.collect(out);
  value.collect(out);
  out.push_back(&gamma);
}

// ---------------------------------------------------------------------------
// Generator

template <typename T>
Generator<T>::Generator(const std::string& name, const GeneratorConfig& cfg) : cfg_(cfg) {
  const int64_t c = cfg.base_channels;
  if (c < 1) throw ConfigError("generator base channel count must be positive");
  if (cfg.residual_blocks < 0) throw ConfigError("generator residual block count must be >= 0");
  stem_ = Conv2d<T>(name + ".stem", 1, c, 7, 1, 3);
  down1_ = Conv2d<T>(name + ".down1", c, 2 * c, 3, 2, 1);
  down2_ = Conv2d<T>(name + ".down2", 2 * c, 4 * c, 3, 2, 1);
  for (int i = 0; i < cfg.residual_blocks; ++i)
    trunk_.emplace_back(name + ".res" + std::to_string(i), 4 * c);
  if (cfg.attention) {
    sa_bottleneck_.emplace(name + ".sa_bottleneck", 4 * c);
    sa_decoder_.emplace(name + ".sa_decoder", 2 * c);
  }
  up1_ = ConvTranspose2d<T>(name + ".up1", 4 * c, 2 * c, 4, 2, 1);
  up2_ = ConvTranspose2d<T>(name + ".up2", 2 * c, c, 4, 2, 1);
  head_ = Conv2d<T>(name + ".head", c, 1, 7, 1, 3);
}

template <typename T>
Var<T> Generator<T>::forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt) {
  const Shape s = x.shape();
  if (s.c != 1) throw DimensionError("generator expects single-channel input, got " + s.str());
  if (s.h % 4 != 0 || s.w % 4 != 0 || s.h == 0 || s.w == 0)
    throw ConfigError("generator input " + s.str() + ": height and width must be multiples of 4");
  Var<T> h = relu(instance_norm(stem_.forward(g, x, opt)));
  h = relu(instance_norm(down1_.forward(g, h, opt)));
  h = relu(instance_norm(down2_.forward(g, h, opt)));
  for (auto& block : trunk_) h = block.forward(g, h, opt);
  if (sa_bottleneck_) h = sa_bottleneck_->forward(g, h, opt);
  h = relu(instance_norm(up1_.forward(g, h, opt)));
  if (sa_decoder_) h = sa_decoder_->forward(g, h, opt);
  h = relu(instance_norm(up2_.forward(g, h, opt)));
  return tanh(head_.forward(g, h, opt));
}

template <typename T>
std::vector<Parameter<T>*> Generator<T>::parameters() {
  std::vector<Parameter<T>*> out;
  stem_.collect(out);
  down1_.collect(out);
  down2_.collect(out);
  for (auto& block : trunk_) block.collect(out);
  if (sa_bottleneck_) sa_bottleneck_->collect(out);
  up1_.collect(out);
  if (sa_decoder_) sa_decoder_->collect(out);
  up2_.collect(out);
  head_.collect(out);
  return out;
}

template <typename T>
std::vector<SelfAttentionBlock<T>*> Generator<T>::attention_blocks() {
  std::vector<SelfAttentionBlock<T>*> out;
  if (sa_bottleneck_) out.push_back(&*sa_bottleneck_);
  if (sa_decoder_) out.push_back(&*sa_decoder_);
  return out;
}

template <typename T>
void init_parameters(Generator<T>& net, uint64_t seed, double stddev) {
  Rng rng(seed);
  for (Parameter<T>* p : net.parameters()) {
    const bool zero = p->name.ends_with(".bias") || p->name.ends_with(".gamma");
    for (T& v : p->value.data()) v = zero ? T(0) : static_cast<T>(rng.normal(0.0, stddev));
    p->zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Discriminator

template <typename T>
PatchDiscriminator<T>::PatchDiscriminator(const std::string& name, const DiscriminatorConfig& cfg)
    : cfg_(cfg) {
  if (cfg.stages < 1) throw ConfigError("discriminator needs at least one stride-2 stage");
  if (cfg.base_channels < 1) throw ConfigError("discriminator base channel count must be positive");
  int64_t in = 1, ch = cfg.base_channels;
  for (int s = 0; s < cfg.stages; ++s) {
    stages_.emplace_back(name + ".stage" + std::to_string(s), in, ch, 4, 2, 1, true, true);
    in = ch;
    if (s + 1 < cfg.stages) ch *= 2;
  }
  if (cfg.attention) attention_.emplace(name + ".sa", in, true);
  head_ = Conv2d<T>(name + ".head", in, 1, 3, 1, 1, true, true);
}

template <typename T>
Var<T> PatchDiscriminator<T>::forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt) {
  const Shape s = x.shape();
  if (s.c != 1) throw DimensionError("discriminator expects single-channel input, got " + s.str());
  if (s.h < min_input_size() || s.w < min_input_size())
    throw ConfigError("discriminator input " + s.str() + " is smaller than the minimum " +
                      std::to_string(min_input_size()) + " for " + std::to_string(cfg_.stages) +
                      " stride-2 stages");
  Var<T> h = x;
  for (auto& conv : stages_) h = leaky_relu(conv.forward(g, h, opt), T(0.2));
  if (attention_) h = attention_->forward(g, h, opt);
  return head_.forward(g, h, opt);
}

template <typename T>
std::vector<Parameter<T>*> PatchDiscriminator<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& conv : stages_) conv.collect(out);
  if (attention_) attention_->collect(out);
  head_.collect(out);
  return out;
}

template <typename T>
std::vector<Conv2d<T>*> PatchDiscriminator<T>::convs() {
  std::vector<Conv2d<T>*> out;
  for (auto& conv : stages_) out.push_back(&conv);
  if (attention_)
    for (Conv2d<T>* c : {&attention_->query, &attention_->key, &attention_->value}) out.push_back(c);
  out.push_back(&head_);
  return out;
}

template <typename T>
std::vector<SpectralNormState<T>*> PatchDiscriminator<T>::spectral_states() {
  std::vector<SpectralNormState<T>*> out;
  for (Conv2d<T>* c : convs()) out.push_back(&*c->spectral);
  return out;
}

template <typename T>
void init_parameters(PatchDiscriminator<T>& net, uint64_t seed, double stddev) {
  Rng rng(seed);
  for (Parameter<T>* p : net.parameters()) {
    const bool zero = p->name.ends_with(".bias") || p->name.ends_with(".gamma");
    for (T& v : p->value.data()) v = zero ? T(0) : static_cast<T>(rng.normal(0.0, stddev));
    p->zero_grad();
  }
  for (Conv2d<T>* c : net.convs()) {
    c->spectral->u.assign(static_cast<size_t>(c->weight.value.shape().n), T(0));
    random_unit(c->spectral->u, rng);
  }
}

template <typename T>
uint64_t parameter_hash(const std::vector<Parameter<T>*>& params) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const Parameter<T>* p : params) {
    mix(p->name.data(), p->name.size());
    mix(p->value.raw(), p->value.size() * sizeof(T));
  }
  return h;
}

#define CMGAN_INSTANTIATE_NN(T)                                                                   \
  template SpectralEstimate<T> power_iterate(SpectralNormState<T>&, const Tensor<T>&, int);      \
  template Tensor<T> spectral_normalize(SpectralNormState<T>&, const Tensor<T>&, int, T*);       \
  template class Conv2d<T>;                                                                       \
  template class ConvTranspose2d<T>;                                                              \
  template class ResidualBlock<T>;                                                                \
  template class SelfAttentionBlock<T>;                                                           \
  template class Generator<T>;                                                                    \
  template class PatchDiscriminator<T>;                                                           \
  template void init_parameters(Generator<T>&, uint64_t, double);                                 \
  template void init_parameters(PatchDiscriminator<T>&, uint64_t, double);                        \
  template uint64_t parameter_hash(const std::vector<Parameter<T>*>&);

CMGAN_INSTANTIATE_NN(float)
CMGAN_INSTANTIATE_NN(double)

}  // namespace cmgan
