// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/losses.hpp"

#include <cmath>
#include <sstream>

#include "cmgan/error.hpp"
#include "cmgan/ops.hpp"
#include "cmgan/rng.hpp"

namespace cmgan {
namespace {

constexpr int64_t kStageChannels[] = {16, 32, 64, 128};
constexpr double kFeatureSlope = 0.2;

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* what) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                         b.shape().str());
}

template <typename T>
Var<T> zero_like_scalar(Graph<T>& g) {
  return g.constant(Tensor<T>::scalar(T(0)));
}

template <typename T>
void check_layers(const std::vector<Var<T>>& fx, const std::vector<Var<T>>& fx_cyc,
                  const std::vector<Var<T>>& fy, const std::vector<Var<T>>& fy_cyc,
                  const std::vector<double>& weights) {
  const size_t n = weights.size();
  if (fx.size() != n || fx_cyc.size() != n || fy.size() != n || fy_cyc.size() != n)
    throw DimensionError("feature lists and layer weights differ in length");
  if (n == 0) throw DimensionError("at least one feature layer is required");
}

template <typename T>
Var<T> squared_frobenius(const Var<T>& a, const Var<T>& b) {
  return mean(sum(square(sub(a, b)), Axes::kC | Axes::kH | Axes::kW));
}

}  // namespace

// ---------------------------------------------------------------------------
// Adversarial

template <typename T>
Var<T> discriminator_loss(const Var<T>& d_real, const Var<T>& d_fake) {
  Var<T> real_term = mean(log_sigmoid(d_real));
  Var<T> fake_term = mean(log_sigmoid(scale(d_fake, T(-1))));
  return scale(add(real_term, fake_term), T(-1));
}

template <typename T>
Var<T> generator_adversarial_loss(const Var<T>& d_fake) {
  return scale(mean(log_sigmoid(d_fake)), T(-1));
}

template <typename T>
AdversarialLosses<T> adversarial_losses(const Var<T>& d_real, const Var<T>& d_fake) {
  return {discriminator_loss(d_real, d_fake), generator_adversarial_loss(d_fake)};
}

// ---------------------------------------------------------------------------
// Cycle terms

template <typename T>
Var<T> cycle_l1(const Var<T>& x, const Var<T>& x_cyc, const Var<T>& y, const Var<T>& y_cyc) {
  require_same_shape(x, x_cyc, "cycle_l1");
  require_same_shape(y, y_cyc, "cycle_l1");
  return add(mean(abs(sub(x, x_cyc))), mean(abs(sub(y, y_cyc))));
}

template <typename T>
Var<T> gram_matrix(const Var<T>& f) {
  const Shape s = f.shape();
  if (s.c < 1) throw DimensionError("gram_matrix needs at least one channel");
  return scale(gram(f), T(1) / static_cast<T>(s.h * s.w * s.c));
}

template <typename T>
Var<T> perceptual_from_features(const std::vector<Var<T>>& fx, const std::vector<Var<T>>& fx_cyc,
                                const std::vector<Var<T>>& fy, const std::vector<Var<T>>& fy_cyc,
                                const std::vector<double>& weights) {
  check_layers(fx, fx_cyc, fy, fy_cyc, weights);
  Var<T> total = zero_like_scalar(fx[0].graph());
  for (size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0) continue;
    require_same_shape(fx[i], fx_cyc[i], "cycle_perceptual");
    require_same_shape(fy[i], fy_cyc[i], "cycle_perceptual");
    Var<T> layer = add(mean(abs(sub(fx[i], fx_cyc[i]))), mean(abs(sub(fy[i], fy_cyc[i]))));
    total = add(total, scale(layer, static_cast<T>(weights[i])));
  }
  return total;
}

template <typename T>
Var<T> style_from_features(const std::vector<Var<T>>& fx, const std::vector<Var<T>>& fx_cyc,
                           const std::vector<Var<T>>& fy, const std::vector<Var<T>>& fy_cyc,
                           const std::vector<double>& weights) {
  check_layers(fx, fx_cyc, fy, fy_cyc, weights);
  Var<T> total = zero_like_scalar(fx[0].graph());
  for (size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0) continue;
    require_same_shape(fx[i], fx_cyc[i], "cycle_style");
    require_same_shape(fy[i], fy_cyc[i], "cycle_style");
    const double d = static_cast<double>(fx[i].shape().c);
    Var<T> layer = add(squared_frobenius(gram_matrix(fx[i]), gram_matrix(fx_cyc[i])),
                       squared_frobenius(gram_matrix(fy[i]), gram_matrix(fy_cyc[i])));
    total = add(total, scale(layer, static_cast<T>(weights[i] / (4 * d * d))));
  }
  return total;
}

// ---------------------------------------------------------------------------
// MS-SSIM

std::vector<double> MsSsimParams::exponents() const {
  if (scales < 1) throw ConfigError("MS-SSIM needs at least one scale");
  return std::vector<double>(static_cast<size_t>(scales), 1.0 / scales);
}

int max_msssim_scales(int64_t height, int64_t width, int window) {
  int scales = 0;
  while (height >= window && width >= window) {
    ++scales;
    height = (height + 1) / 2;
    width = (width + 1) / 2;
  }
  return scales;
}

template <typename T>
Tensor<T> gaussian_window(int size, double sigma) {
  if (size < 1 || sigma <= 0) throw ConfigError("gaussian window needs a positive size and sigma");
  std::vector<double> g(static_cast<size_t>(size));
  double total = 0;
  const double mid = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-(i - mid) * (i - mid) / (2 * sigma * sigma));
    total += g[i];
  }
  Tensor<T> k(Shape{1, 1, size, size});
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) k.at(0, 0, i, j) = static_cast<T>(g[i] * g[j] / (total * total));
  return k;
}

template <typename T>
Var<T> ms_ssim(const Var<T>& a, const Var<T>& b, const MsSsimParams& p) {
  require_same_shape(a, b, "ms_ssim");
  const Shape s = a.shape();
  if (s.c != 1) throw DimensionError("ms_ssim expects single-channel images, got " + s.str());
  const std::vector<double> expo = p.exponents();
  const int feasible = max_msssim_scales(s.h, s.w, p.window);
  if (p.scales > feasible) {
    std::ostringstream os;
    os << "image " << s.h << "x" << s.w << " supports at most " << feasible
       << " MS-SSIM scale(s) with a " << p.window << " px window; " << p.scales << " requested";
    throw ConfigError(os.str());
  }
  Graph<T>& g = a.graph();
  Var<T> window = g.constant(gaussian_window<T>(p.window, p.sigma));
  auto blur = [&](const Var<T>& v) { return conv2d(v, window, std::nullopt, 1, 0); };
  const T c1 = static_cast<T>(p.c1), c2 = static_cast<T>(p.c2);

  Var<T> result;
  Var<T> xa = a, xb = b;
  for (int j = 0; j < p.scales; ++j) {
    Var<T> mu_a = blur(xa), mu_b = blur(xb);
    Var<T> mu_aa = square(mu_a), mu_bb = square(mu_b), mu_ab = mul(mu_a, mu_b);
    Var<T> var_a = sub(blur(square(xa)), mu_aa);
    Var<T> var_b = sub(blur(square(xb)), mu_bb);
    Var<T> cov = sub(blur(mul(xa, xb)), mu_ab);
    Var<T> cs = div(add_scalar(scale(cov, T(2)), c2), add_scalar(add(var_a, var_b), c2));
    Var<T> map = cs;
    if (j + 1 == p.scales) {
      Var<T> lum = div(add_scalar(scale(mu_ab, T(2)), c1), add_scalar(add(mu_aa, mu_bb), c1));
      map = mul(lum, cs);
    }
    Var<T> term = pow_pos(mean(map, Axes::kC | Axes::kH | Axes::kW), static_cast<T>(expo[j]));
    result = j == 0 ? term : mul(result, term);
    if (j + 1 < p.scales) {
      xa = avg_pool2(xa);
      xb = avg_pool2(xb);
    }
  }
  return mean(result);
}

template <typename T>
Var<T> msssim_cycle_loss(const Var<T>& x, const Var<T>& x_cyc, const Var<T>& y, const Var<T>& y_cyc,
                         const MsSsimParams& p) {
  auto unit = [](const Var<T>& v) { return add_scalar(scale(v, T(0.5)), T(0.5)); };
  Var<T> sx = ms_ssim(unit(x), unit(x_cyc), p);
  Var<T> sy = ms_ssim(unit(y), unit(y_cyc), p);
  return add_scalar(scale(add(sx, sy), T(-1)), T(2));
}

// ---------------------------------------------------------------------------
// Feature extractor

template <typename T>
FeatureExtractor<T>::FeatureExtractor(int layers, uint64_t seed) {
  if (layers < 1 || layers > kMaxLayers)
    throw ConfigError("feature extractor layer count must be in [1, 4], got " + std::to_string(layers));
  Rng rng(seed);
  int64_t in = 1;
  for (int i = 0; i < layers; ++i) {
    const int64_t out = kStageChannels[i];
    Parameter<T> p{"features.stage" + std::to_string(i) + ".weight", Tensor<T>(Shape{out, in, 3, 3}),
                   Tensor<T>(Shape{out, in, 3, 3})};
    const double stddev = std::sqrt(2.0 / static_cast<double>(in * 9));
    for (T& v : p.value.data()) v = static_cast<T>(rng.normal(0.0, stddev));
    weights_.push_back(std::move(p));
    in = out;
  }
}

template <typename T>
std::vector<Var<T>> FeatureExtractor<T>::features(Graph<T>& g, const Var<T>& x) const {
  std::vector<Var<T>> taps;
  Var<T> h = x;
  for (const Parameter<T>& w : weights_) {
    if (h.shape().h < 2 || h.shape().w < 2)
      throw ConfigError("input " + x.shape().str() + " too small for " + std::to_string(layers()) +
                        " feature layers");
    h = leaky_relu(conv2d(h, g.frozen(w), std::nullopt, 2, 1), static_cast<T>(kFeatureSlope));
    taps.push_back(h);
  }
  return taps;
}

template <typename T>
std::vector<Parameter<T>*> FeatureExtractor<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& w : weights_) out.push_back(&w);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> FeatureExtractor<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& w : weights_) out.push_back(&w);
  return out;
}

namespace {

template <typename T>
Var<T> reconstruct(Graph<T>& g, std::vector<Parameter<T>*>& enc, std::vector<Parameter<T>>& dec,
                   const Var<T>& x) {
  Var<T> h = x;
  for (Parameter<T>* w : enc) h = leaky_relu(conv2d(h, g.param(*w), std::nullopt, 2, 1), T(kFeatureSlope));
  for (size_t i = 0; i < dec.size(); ++i) {
    h = conv2d_transpose(h, g.param(dec[i]), 2, 1);
    h = i + 1 < dec.size() ? leaky_relu(h, T(kFeatureSlope)) : tanh(h);
  }
  return h;
}

template <typename T>
double reconstruction_loss(std::vector<Parameter<T>*>& enc, std::vector<Parameter<T>>& dec,
                           const std::vector<Tensor<T>>& clean) {
  double total = 0;
  for (const Tensor<T>& img : clean) {
    Graph<T> g;
    Var<T> x = g.constant(img);
    total += mean(square(sub(reconstruct(g, enc, dec, x), x))).value().item();
  }
  return total / static_cast<double>(clean.size());
}

}  // namespace

template <typename T>
FeatureExtractor<T> build_feature_extractor(const FeatureExtractorConfig& cfg,
                                            const std::vector<Tensor<T>>* clean, PretrainReport* report) {
  FeatureExtractor<T> fe(cfg.layers, cfg.seed);
  if (cfg.mode == FeatureMode::kRandomFixed) return fe;
  if (!clean || clean->empty())
    throw ConfigError("autoencoder_pretrained feature extractor requires a clean-domain dataset");
  if (cfg.pretrain_steps < 0 || cfg.pretrain_batch < 1)
    throw ConfigError("feature pretraining needs steps >= 0 and batch >= 1");
  for (const Tensor<T>& img : *clean) {
    const Shape s = img.shape();
    const int64_t m = int64_t{1} << cfg.layers;
    if (s.n != 1 || s.c != 1 || s.h % m != 0 || s.w % m != 0)
      throw ConfigError("pretraining images must be (1,1,h,w) with h, w multiples of " + std::to_string(m));
  }

  std::vector<Parameter<T>*> enc = fe.parameters();
  std::vector<Parameter<T>> dec;
  Rng rng(cfg.seed ^ 0x5eedae5eedull);
  for (int i = cfg.layers - 1; i >= 0; --i) {
    const int64_t in = kStageChannels[i];
    const int64_t out = i == 0 ? 1 : kStageChannels[i - 1];
    Shape ws{in, out, 4, 4};
    Parameter<T> p{"decoder.stage" + std::to_string(i) + ".weight", Tensor<T>(ws), Tensor<T>(ws)};
    const double stddev = std::sqrt(2.0 / static_cast<double>(in * 4));
    for (T& v : p.value.data()) v = static_cast<T>(rng.normal(0.0, stddev));
    dec.push_back(std::move(p));
  }
  std::vector<Parameter<T>*> all = enc;
  for (auto& p : dec) all.push_back(&p);

  PretrainReport rep;
  rep.initial_loss = reconstruction_loss(enc, dec, *clean);
  AdamState state;
  AdamConfig adam{cfg.pretrain_lr, 0.9, 0.999, 1e-8};
  for (int step = 0; step < cfg.pretrain_steps; ++step) {
    zero_grads(all);
    for (int b = 0; b < cfg.pretrain_batch; ++b) {
      const Tensor<T>& img = (*clean)[rng.below(clean->size())];
      Graph<T> g;
      Var<T> x = g.constant(img);
      Var<T> loss = scale(mean(square(sub(reconstruct(g, enc, dec, x), x))),
                          T(1) / static_cast<T>(cfg.pretrain_batch));
      g.backward(loss);
    }
    adam_update(all, state, adam);
  }
  rep.final_loss = reconstruction_loss(enc, dec, *clean);
  for (Parameter<T>* p : enc) p->zero_grad();
  if (report) *report = rep;
  return fe;
}

// ---------------------------------------------------------------------------
// Total objective

void LossWeights::validate(int layers) const {
  for (double v : {l1, msssim, cpercep, cstyle})
    if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and non-negative");
  for (const auto* per : {&layer_cp, &layer_cs}) {
    if (!per->empty() && static_cast<int>(per->size()) != layers)
      throw ConfigError("per-layer loss weights need " + std::to_string(layers) + " entries, got " +
                        std::to_string(per->size()));
    for (double v : *per)
      if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("per-layer loss weights must be non-negative");
  }
}

std::vector<double> LossWeights::percep_layers(int layers) const {
  return layer_cp.empty() ? std::vector<double>(static_cast<size_t>(layers), 1.0 / layers) : layer_cp;
}

std::vector<double> LossWeights::style_layers(int layers) const {
  return layer_cs.empty() ? std::vector<double>(static_cast<size_t>(layers), 1.0 / layers) : layer_cs;
}

template <typename T>
std::array<double, 4> CycleLoss<T>::components() const {
  auto value = [](const Var<T>& v) { return v.valid() ? static_cast<double>(v.value().item()) : 0.0; };
  return {value(l1), value(msssim), value(cpercep), value(cstyle)};
}

template <typename T>
CycleLoss<T> total_cycle_loss(const FeatureExtractor<T>& fe, const CycleTensors<T>& t,
                              const LossWeights& w, const MsSsimParams& p) {
  w.validate(fe.layers());
  Graph<T>& g = t.x.graph();
  CycleLoss<T> out;
  out.total = zero_like_scalar(g);
  auto accumulate = [&](const Var<T>& term, double weight) {
    out.total = add(out.total, scale(term, static_cast<T>(weight)));
  };
  if (w.l1 > 0) {
    out.l1 = cycle_l1(t.x, t.x_cyc, t.y, t.y_cyc);
    accumulate(out.l1, w.l1);
  }
  if (w.msssim > 0) {
    out.msssim = msssim_cycle_loss(t.x, t.x_cyc, t.y, t.y_cyc, p);
    accumulate(out.msssim, w.msssim);
  }
  if (w.cpercep > 0 || w.cstyle > 0) {
    auto fx = fe.features(g, t.x), fxc = fe.features(g, t.x_cyc);
    auto fy = fe.features(g, t.y), fyc = fe.features(g, t.y_cyc);
    if (w.cpercep > 0) {
      out.cpercep = perceptual_from_features(fx, fxc, fy, fyc, w.percep_layers(fe.layers()));
      accumulate(out.cpercep, w.cpercep);
    }
    if (w.cstyle > 0) {
      out.cstyle = style_from_features(fx, fxc, fy, fyc, w.style_layers(fe.layers()));
      accumulate(out.cstyle, w.cstyle);
    }
  }
  return out;
}

double total_cycle_loss(const std::array<double, 4>& c, const LossWeights& w) {
  w.validate(static_cast<int>(std::max(w.layer_cp.size(), w.layer_cs.size())));
  double total = 0;
  const double weights[] = {w.l1, w.msssim, w.cpercep, w.cstyle};
  for (int i = 0; i < 4; ++i)
    if (weights[i] > 0) total += weights[i] * c[i];
  return total;
}

#define CMGAN_INSTANTIATE_LOSSES(T)                                                                 \
  template Var<T> discriminator_loss(const Var<T>&, const Var<T>&);                                 \
  template Var<T> generator_adversarial_loss(const Var<T>&);                                        \
  template AdversarialLosses<T> adversarial_losses(const Var<T>&, const Var<T>&);                   \
  template Var<T> cycle_l1(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&);             \
  template Var<T> gram_matrix(const Var<T>&);                                                       \
  template Var<T> perceptual_from_features(const std::vector<Var<T>>&, const std::vector<Var<T>>&, \
                                           const std::vector<Var<T>>&, const std::vector<Var<T>>&, \
                                           const std::vector<double>&);                             \
  template Var<T> style_from_features(const std::vector<Var<T>>&, const std::vector<Var<T>>&,      \
                                      const std::vector<Var<T>>&, const std::vector<Var<T>>&,      \
                                      const std::vector<double>&);                                  \
  template Tensor<T> gaussian_window(int, double);                                                  \
  template Var<T> ms_ssim(const Var<T>&, const Var<T>&, const MsSsimParams&);                       \
  template Var<T> msssim_cycle_loss(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,     \
                                    const MsSsimParams&);                                           \
  template class FeatureExtractor<T>;                                                               \
  template FeatureExtractor<T> build_feature_extractor(const FeatureExtractorConfig&,               \
                                                       const std::vector<Tensor<T>>*, PretrainReport*); \
  template struct CycleLoss<T>;                                                                     \
  template CycleLoss<T> total_cycle_loss(const FeatureExtractor<T>&, const CycleTensors<T>&,        \
                                         const LossWeights&, const MsSsimParams&);

CMGAN_INSTANTIATE_LOSSES(float)
CMGAN_INSTANTIATE_LOSSES(double)

}  // namespace cmgan
