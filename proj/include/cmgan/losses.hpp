// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "cmgan/graph.hpp"
#include "cmgan/optim.hpp"

namespace cmgan {

// ---------------------------------------------------------------------------
// Adversarial

// -mean log s(real) - mean log(1 - s(fake)), via log-sigmoid.
template <typename T>
Var<T> discriminator_loss(const Var<T>& d_real, const Var<T>& d_fake);

// Non-saturating generator objective -mean log s(fake).
template <typename T>
Var<T> generator_adversarial_loss(const Var<T>& d_fake);

template <typename T>
struct AdversarialLosses {
  Var<T> d;
  Var<T> g;
};

template <typename T>
AdversarialLosses<T> adversarial_losses(const Var<T>& d_real, const Var<T>& d_fake);

// ---------------------------------------------------------------------------
// Cycle terms

// mean|x - x_cyc| + mean|y - y_cyc|.
template <typename T>
Var<T> cycle_l1(const Var<T>& x, const Var<T>& x_cyc, const Var<T>& y, const Var<T>& y_cyc);

// (n, d, h, w) -> (n, 1, d, d), normalised by h*w*d.
template <typename T>
Var<T> gram_matrix(const Var<T>& f);

// Per-layer weighted mean absolute feature difference over both domains.
// Layers with zero weight are not evaluated.
template <typename T>
Var<T> perceptual_from_features(const std::vector<Var<T>>& fx, const std::vector<Var<T>>& fx_cyc,
                                const std::vector<Var<T>>& fy, const std::vector<Var<T>>& fy_cyc,
                                const std::vector<double>& weights);

// sum_i w_i / (4 d_i^2) (|Gr(fx_i) - Gr(fx_cyc_i)|_F^2 + |Gr(fy_i) - Gr(fy_cyc_i)|_F^2),
// the squared norm averaged over the batch.
template <typename T>
Var<T> style_from_features(const std::vector<Var<T>>& fx, const std::vector<Var<T>>& fx_cyc,
                           const std::vector<Var<T>>& fy, const std::vector<Var<T>>& fy_cyc,
                           const std::vector<double>& weights);

struct MsSsimParams {
  int scales = 3;
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
  // Uniform, summing to one.
  std::vector<double> exponents() const;
};

// Largest scale count for which the coarsest level keeps >= window pixels.
int max_msssim_scales(int64_t height, int64_t width, int window = 11);

// Normalised separable Gaussian as a (1, 1, k, k) kernel.
template <typename T>
Tensor<T> gaussian_window(int size, double sigma);

// Differentiable MS-SSIM of (n, 1, h, w) images in [0, 1], averaged over the batch.
template <typename T>
Var<T> ms_ssim(const Var<T>& a, const Var<T>& b, const MsSsimParams& p);

// [1 - MS-SSIM(x, x_cyc)] + [1 - MS-SSIM(y, y_cyc)] on generator-range inputs
// mapped from [-1, 1] to [0, 1].
template <typename T>
Var<T> msssim_cycle_loss(const Var<T>& x, const Var<T>& x_cyc, const Var<T>& y, const Var<T>& y_cyc,
                         const MsSsimParams& p);

// ---------------------------------------------------------------------------
// Feature extractor

enum class FeatureMode { kRandomFixed, kAutoencoderPretrained };

struct FeatureExtractorConfig {
  FeatureMode mode = FeatureMode::kRandomFixed;
  int layers = 3;
  uint64_t seed = 0;
  int pretrain_steps = 300;
  int pretrain_batch = 4;
  double pretrain_lr = 1e-3;
};

// Fixed stride-2 encoder 1 -> 16 -> 32 -> 64 -> 128 (first `layers` stages),
// 3x3 convolutions followed by leaky relu 0.2; one tap per stage.
template <typename T>
class FeatureExtractor {
 public:
  static constexpr int kMaxLayers = 4;

  // Random He-scaled weights drawn from `seed`.
  explicit FeatureExtractor(int layers = 3, uint64_t seed = 0);

  // Taps for x. Weights enter the graph as constants.
  std::vector<Var<T>> features(Graph<T>& g, const Var<T>& x) const;

  int layers() const { return static_cast<int>(weights_.size()); }
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;

 private:
  std::vector<Parameter<T>> weights_;
};

struct PretrainReport {
  double initial_loss = 0;
  double final_loss = 0;
};

// Builds the extractor. The autoencoder mode trains encoder and a transposed
// decoder on `clean` images (n = 1 each, in [-1, 1]) with Adam on the mean
// squared reconstruction error, then keeps the encoder.
template <typename T>
FeatureExtractor<T> build_feature_extractor(const FeatureExtractorConfig& cfg,
                                            const std::vector<Tensor<T>>* clean = nullptr,
                                            PretrainReport* report = nullptr);

// ---------------------------------------------------------------------------
// Total objective

struct LossWeights {
  double l1 = 10;
  double msssim = 1;
  double cpercep = 1;
  double cstyle = 0.1;
  // Per-layer weights; empty means 1/L for each of the L layers.
  std::vector<double> layer_cp;
  std::vector<double> layer_cs;

  // Throws ConfigError on negative or mis-sized weights.
  void validate(int layers) const;
  std::vector<double> percep_layers(int layers) const;
  std::vector<double> style_layers(int layers) const;
};

template <typename T>
struct CycleTensors {
  Var<T> x, x_cyc, y, y_cyc;
};

// Components that carry zero weight are skipped and left invalid.
template <typename T>
struct CycleLoss {
  Var<T> l1, msssim, cpercep, cstyle;
  Var<T> total;

  // Values for reporting; skipped components read as 0.
  std::array<double, 4> components() const;
};

template <typename T>
CycleLoss<T> total_cycle_loss(const FeatureExtractor<T>& fe, const CycleTensors<T>& t,
                              const LossWeights& w, const MsSsimParams& p);

// Weighted sum of already evaluated components (l1, msssim, cpercep, cstyle).
double total_cycle_loss(const std::array<double, 4>& components, const LossWeights& w);

}  // namespace cmgan
