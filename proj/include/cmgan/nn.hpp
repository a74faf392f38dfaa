// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmgan/ops.hpp"
#include "cmgan/rng.hpp"

namespace cmgan {

// How a forward pass binds parameters into the graph.
struct ForwardOptions {
  // Bind parameters with Graph::param (gradients flow) or as constants.
  bool train_params = true;
  // Run the spectral-norm power iteration (and persist u) during this pass.
  bool update_spectral = false;
  // Power iterations per update.
  int spectral_iterations = 1;
};

template <typename T>
Var<T> bind(Graph<T>& g, Parameter<T>& p, bool trainable) {
  return trainable ? g.param(p) : g.frozen(p);
}

// Persisted left singular-vector estimate of a weight viewed (c_out, rest).
template <typename T>
struct SpectralNormState {
  std::vector<T> u;
};

template <typename T>
struct SpectralEstimate {
  std::vector<T> v;
  T sigma = 0;
};

// `iterations` rounds of v <- W^T u / |W^T u|, u <- W v / |W v| (u is
// persisted and stays unit-norm), then sigma = u^T W v. With zero iterations
// only v and sigma are refreshed.
template <typename T>
SpectralEstimate<T> power_iterate(SpectralNormState<T>& state, const Tensor<T>& weight, int iterations);

// weight / sigma after `iterations` power-iteration updates of `state`.
template <typename T>
Tensor<T> spectral_normalize(SpectralNormState<T>& state, const Tensor<T>& weight, int iterations,
                             T* sigma_out = nullptr);

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int64_t c_in, int64_t c_out, int kernel, int stride, int padding,
         bool bias = true, bool spectral = false);

  Var<T> forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt);
  void collect(std::vector<Parameter<T>*>& out);

  Parameter<T> weight;
  std::optional<Parameter<T>> bias;
  std::optional<SpectralNormState<T>> spectral;
  int stride = 1;
  int padding = 0;
};

// Upsampling stage: conv2d_transpose without bias.
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::string name, int64_t c_in, int64_t c_out, int kernel, int stride, int padding);

  Var<T> forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt);
  void collect(std::vector<Parameter<T>*>& out);

  Parameter<T> weight;  // (c_in, c_out, k, k)
  int stride = 1;
  int padding = 0;
};

// conv3x3 -> instance norm -> relu -> conv3x3 -> instance norm, plus identity.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, int64_t channels);

  Var<T> forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt);
  void collect(std::vector<Parameter<T>*>& out);

 private:
  Conv2d<T> conv1_, conv2_;
};

// Position-to-position attention through 1x1 query/key/value projections,
// blended into the input by a learnable gamma that starts at exactly 0.
template <typename T>
class SelfAttentionBlock {
 public:
  static constexpr int kReduction = 8;

  SelfAttentionBlock() = default;
  // Throws ConfigError unless `channels` is divisible by 8.
  SelfAttentionBlock(const std::string& name, int64_t channels, bool spectral = false);

  // `attention_out`, when given, receives the (n, 1, hw, hw) row-stochastic map.
  Var<T> forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt,
                 Var<T>* attention_out = nullptr);
  void collect(std::vector<Parameter<T>*>& out);

  Conv2d<T> query, key, value;
  Parameter<T> gamma;
  int64_t channels = 0;
};

struct GeneratorConfig {
  int64_t base_channels = 32;
  int residual_blocks = 4;
  bool attention = true;
};

// Encoder (7x7 stem, two stride-2 stages), residual trunk, self-attention at
// the bottleneck and after the first upsampling stage, decoder, tanh head.
template <typename T>
class Generator {
 public:
  Generator() = default;
  Generator(const std::string& name, const GeneratorConfig& cfg);

  // x: (n, 1, h, w) with h and w multiples of 4. Output has the same shape, in [-1, 1].
  Var<T> forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt = {});
  std::vector<Parameter<T>*> parameters();
  const GeneratorConfig& config() const { return cfg_; }
  std::vector<SelfAttentionBlock<T>*> attention_blocks();

 private:
  GeneratorConfig cfg_;
  Conv2d<T> stem_, down1_, down2_;
  std::vector<ResidualBlock<T>> trunk_;
  std::optional<SelfAttentionBlock<T>> sa_bottleneck_, sa_decoder_;
  ConvTranspose2d<T> up1_, up2_;
  Conv2d<T> head_;
};

struct DiscriminatorConfig {
  int64_t base_channels = 64;
  int stages = 3;
  bool attention = true;
};

// Stride-2 4x4 convolutions with leaky relu, one self-attention block, and a
// 3x3 head emitting one logit per patch. Every convolution is spectrally
// normalised.
template <typename T>
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(const std::string& name, const DiscriminatorConfig& cfg);

  // Returns the (n, 1, h / 2^s, w / 2^s) logit map.
  Var<T> forward(Graph<T>& g, const Var<T>& x, const ForwardOptions& opt = {});
  std::vector<Parameter<T>*> parameters();
  std::vector<SpectralNormState<T>*> spectral_states();
  std::vector<Conv2d<T>*> convs();
  const DiscriminatorConfig& config() const { return cfg_; }
  int64_t min_input_size() const { return int64_t{1} << cfg_.stages; }

 private:
  DiscriminatorConfig cfg_;
  std::vector<Conv2d<T>> stages_;
  std::optional<SelfAttentionBlock<T>> attention_;
  Conv2d<T> head_;
};

// Weights ~ N(0, stddev^2), biases 0, gamma 0, spectral u random unit vectors;
// deterministic in `seed`.
template <typename T>
void init_parameters(Generator<T>& net, uint64_t seed, double stddev = 0.02);
template <typename T>
void init_parameters(PatchDiscriminator<T>& net, uint64_t seed, double stddev = 0.02);

// FNV-1a over parameter names and raw values.
template <typename T>
uint64_t parameter_hash(const std::vector<Parameter<T>*>& params);

}  // namespace cmgan
