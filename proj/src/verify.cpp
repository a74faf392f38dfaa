// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/verify.hpp"

#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <sstream>

#include "cmgan/error.hpp"
#include "cmgan/gradcheck.hpp"
#include "cmgan/image.hpp"
#include "cmgan/losses.hpp"
#include "cmgan/metrics.hpp"
#include "cmgan/motion_sim.hpp"
#include "cmgan/nn.hpp"
#include "cmgan/reference.hpp"
#include "cmgan/trainer.hpp"

namespace cmgan {
namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

enum class Draw { kSigned, kAwayFromZero, kPositive };

Tensor<double> draw(Shape s, uint64_t seed, Draw kind = Draw::kSigned) {
  Rng rng(seed);
  Tensor<double> t(s);
  for (double& v : t.data()) {
    switch (kind) {
      case Draw::kSigned:
        v = rng.uniform(-1.0, 1.0);
        break;
      case Draw::kAwayFromZero:
        v = rng.uniform(0.1, 1.0) * (rng.uniform() < 0.5 ? -1 : 1);
        break;
      case Draw::kPositive:
        v = rng.uniform(0.2, 2.0);
        break;
    }
  }
  return t;
}

// Scalar probe of a tensor-valued op: sum(y * r) for a fixed random r.
Var<double> project(const Var<double>& y, uint64_t seed) {
  return sum(mul(y, y.graph().constant(draw(y.shape(), seed ^ 0x9e37))));
}

// Accumulates gradcheck reports across seeds into one check line.
struct Tally {
  std::string name;
  size_t checked = 0;
  size_t skipped = 0;
  double worst = 0;
  bool passed = true;

  void add(const GradcheckReport& r, size_t min_checked = 1) {
    checked += r.entries.size();
    skipped += r.kinks_skipped;
    worst = std::max(worst, r.max_rel_error);
    passed = passed && r.passed && r.entries.size() >= min_checked;
  }
  CheckResult result() const {
    return {name, passed,
            "checked=" + std::to_string(checked) + " max_rel_error=" + fmt(worst) +
                " kinks_skipped=" + std::to_string(skipped)};
  }
};

GradcheckOptions options(uint64_t seed) {
  GradcheckOptions opt;
  opt.seed = seed;
  opt.skip_kinks = true;
  return opt;
}

using Unary = std::function<Var<double>(const Var<double>&)>;
using Binary = std::function<Var<double>(const Var<double>&, const Var<double>&)>;

CheckResult check_unary(const std::string& name, int seeds, Shape s, Draw kind, const Unary& op) {
  Tally t{name};
  for (int seed = 0; seed < seeds; ++seed) {
    const auto x = draw(s, 1000 + static_cast<uint64_t>(seed), kind);
    t.add(gradcheck([&](Graph<double>&, const Var<double>& v) { return project(op(v), seed); }, x, options(seed)));
  }
  return t.result();
}

// Checks both operands, the other held constant.
CheckResult check_binary(const std::string& name, int seeds, Shape sa, Draw ka, Shape sb, Draw kb,
                         const Binary& op) {
  Tally t{name};
  for (int seed = 0; seed < seeds; ++seed) {
    const auto a = draw(sa, 2000 + static_cast<uint64_t>(seed), ka);
    const auto b = draw(sb, 3000 + static_cast<uint64_t>(seed), kb);
    t.add(gradcheck([&](Graph<double>& g, const Var<double>& v) { return project(op(v, g.constant(b)), seed); }, a,
                    options(seed)));
    t.add(gradcheck([&](Graph<double>& g, const Var<double>& v) { return project(op(g.constant(a), v), seed); }, b,
                    options(seed)));
  }
  return t.result();
}

Tensor<double> phantom_tensor(uint64_t seed, bool corrupt) {
  Image img = make_phantoms(1, 16, seed)[0];
  if (corrupt) {
    MotionSpec spec;
    spec.seed = seed;
    img = corrupt_image(img, spec);
  }
  return to_tensor<double>(img);
}

// Generator objective of a small cycle model: both adversarial terms plus the
// four weighted cycle components.
void check_objective(int seed, Tally& wrt_x, Tally& wrt_y, Tally& wrt_params) {
  TrainConfig cfg;
  cfg.image_size = 16;
  cfg.generator = {8, 1, true};
  cfg.discriminator = {8, 2, true};
  cfg.msssim.scales = 1;
  cfg.init_stddev = 0.1;
  cfg.seed = 500 + static_cast<uint64_t>(seed);
  CycleModel<double> model(cfg);
  Rng rng(cfg.seed);
  for (auto* gen : {&model.g1, &model.g2})
    for (auto* blk : gen->attention_blocks()) blk->gamma.value[0] = rng.uniform(-0.5, 0.5);
  const auto x0 = phantom_tensor(600 + static_cast<uint64_t>(seed), true);
  const auto y0 = phantom_tensor(700 + static_cast<uint64_t>(seed), false);
  GradcheckOptions opt = options(static_cast<uint64_t>(seed));
  opt.max_elements = 24;
  wrt_x.add(gradcheck([&](Graph<double>& g,
                          const Var<double>& x) { return generator_objective(g, model, x, g.constant(y0), cfg).total; },
                      x0, opt),
            20);
  wrt_y.add(gradcheck([&](Graph<double>& g,
                          const Var<double>& y) { return generator_objective(g, model, g.constant(x0), y, cfg).total; },
                      y0, opt),
            20);
  opt.max_elements = 2;
  auto params = model.g1.parameters();
  const auto p2 = model.g2.parameters();
  params.insert(params.end(), p2.begin(), p2.end());
  wrt_params.add(gradcheck_params(
      [&](Graph<double>& g) { return generator_objective(g, model, g.constant(x0), g.constant(y0), cfg).total; },
      params, opt));
}

double dense_top_singular_value(const Tensor<double>& w) {
  const Shape s = w.shape();
  Eigen::MatrixXd m(s.n, s.c * s.h * s.w);
  for (int64_t i = 0; i < m.rows(); ++i)
    for (int64_t j = 0; j < m.cols(); ++j) m(i, j) = w[static_cast<size_t>(i * m.cols() + j)];
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

Image noise_image(int64_t n, Rng& rng) {
  Image img(n, n);
  for (double& v : img.pixels) v = std::round(rng.uniform(0, 255));
  return img;
}

// b = a plus uniform noise of the given amplitude, quantised and clamped.
Image perturbed(const Image& a, double amplitude, Rng& rng) {
  Image b = a;
  for (double& v : b.pixels) v = std::round(std::clamp(v + rng.uniform(-amplitude, amplitude), 0.0, 255.0));
  return b;
}

Tensor<double> unit_tensor(const Image& img) {
  Tensor<double> t({1, 1, img.height, img.width});
  for (size_t i = 0; i < img.size(); ++i) t[i] = img.pixels[i] / 255.0;
  return t;
}

Image unit_image(const Image& img) {
  Image out = img;
  for (double& v : out.pixels) v /= 255.0;
  return out;
}

template <typename F>
SuiteResult timed(const std::string& name, F body) {
  const auto start = Clock::now();
  SuiteResult r;
  r.suite = name;
  body(r);
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

}  // namespace

bool SuiteResult::passed() const {
  if (checks.empty()) return false;
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

std::string SuiteResult::report() const {
  std::ostringstream os;
  for (const auto& c : checks) os << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  return os.str();
}

SuiteResult verify_gradcheck(int seeds) {
  return timed("gradcheck", [&](SuiteResult& r) {
    using D = Draw;
    auto& out = r.checks;
    const Shape s{1, 2, 3, 4}, one{1, 1, 1, 1};
    out.push_back(check_binary("add", seeds, s, D::kSigned, s, D::kSigned, [](auto& a, auto& b) { return add(a, b); }));
    out.push_back(check_binary("add scalar operand", seeds, s, D::kSigned, one, D::kSigned,
                               [](auto& a, auto& b) { return add(a, b); }));
    out.push_back(check_binary("sub", seeds, s, D::kSigned, s, D::kSigned, [](auto& a, auto& b) { return sub(a, b); }));
    out.push_back(check_binary("mul", seeds, s, D::kSigned, s, D::kSigned, [](auto& a, auto& b) { return mul(a, b); }));
    out.push_back(check_binary("mul scalar operand", seeds, one, D::kSigned, s, D::kSigned,
                               [](auto& a, auto& b) { return mul(a, b); }));
    out.push_back(check_binary("div", seeds, s, D::kSigned, s, D::kPositive, [](auto& a, auto& b) { return div(a, b); }));
    out.push_back(check_unary("scale", seeds, s, D::kSigned, [](auto& x) { return scale(x, 1.7); }));
    out.push_back(check_unary("add_scalar", seeds, s, D::kSigned, [](auto& x) { return add_scalar(x, 0.3); }));
    out.push_back(check_unary("abs", seeds, s, D::kAwayFromZero, [](auto& x) { return abs(x); }));
    out.push_back(check_unary("square", seeds, s, D::kSigned, [](auto& x) { return square(x); }));
    out.push_back(check_unary("tanh", seeds, s, D::kSigned, [](auto& x) { return tanh(scale(x, 2.0)); }));
    out.push_back(check_unary("relu", seeds, s, D::kAwayFromZero, [](auto& x) { return relu(x); }));
    out.push_back(check_unary("leaky_relu", seeds, s, D::kAwayFromZero, [](auto& x) { return leaky_relu(x, 0.2); }));
    out.push_back(check_unary("sigmoid", seeds, s, D::kSigned, [](auto& x) { return sigmoid(scale(x, 3.0)); }));
    out.push_back(check_unary("log", seeds, s, D::kPositive, [](auto& x) { return log(x); }));
    out.push_back(check_unary("log_sigmoid", seeds, s, D::kSigned, [](auto& x) { return log_sigmoid(scale(x, 5.0)); }));
    out.push_back(check_unary("pow_pos", seeds, s, D::kAwayFromZero, [](auto& x) { return pow_pos(x, 1.5); }));
    out.push_back(check_unary("sum", seeds, s, D::kSigned, [](auto& x) { return sum(x, Axes::kSpatial); }));
    out.push_back(check_unary("mean", seeds, s, D::kSigned, [](auto& x) { return mean(x, Axes::kC | Axes::kH); }));
    out.push_back(check_unary("softmax", seeds, s, D::kSigned, [](auto& x) { return softmax(scale(x, 2.0), 3); }));
    out.push_back(check_unary("softmax channel axis", seeds, s, D::kSigned, [](auto& x) { return softmax(x, 1); }));
    out.push_back(check_binary("batched_matmul", seeds, {1, 2, 3, 4}, D::kSigned, {1, 2, 4, 5}, D::kSigned,
                               [](auto& a, auto& b) { return batched_matmul(a, b); }));
    out.push_back(check_unary("gram", seeds, {1, 3, 4, 5}, D::kSigned, [](auto& x) { return gram(x); }));
    out.push_back(check_unary("transpose_hw", seeds, s, D::kSigned, [](auto& x) { return transpose_hw(x); }));
    out.push_back(check_unary("reshape", seeds, s, D::kSigned, [](auto& x) { return reshape(x, Shape{1, 1, 6, 4}); }));
    out.push_back(check_binary("conv2d", seeds, {1, 2, 7, 7}, D::kSigned, {3, 2, 3, 3}, D::kSigned,
                               [](auto& x, auto& w) { return conv2d(x, w, std::nullopt, 2, 1); }));
    out.push_back(check_binary("conv2d bias", seeds, {1, 2, 5, 6}, D::kSigned, {1, 3, 1, 1}, D::kSigned,
                               [](auto& x, auto& b) {
                                 auto& g = x.graph();
                                 return conv2d(x, g.constant(draw({3, 2, 3, 3}, 77)), b, 1, 1);
                               }));
    out.push_back(check_binary("conv2d_transpose", seeds, {1, 3, 4, 4}, D::kSigned, {3, 2, 4, 4}, D::kSigned,
                               [](auto& x, auto& w) { return conv2d_transpose(x, w, 2, 1); }));
    out.push_back(check_unary("avg_pool2", seeds, {1, 2, 5, 7}, D::kSigned, [](auto& x) { return avg_pool2(x); }));
    out.push_back(check_unary("instance_norm", seeds, {1, 2, 4, 5}, D::kSigned, [](auto& x) { return instance_norm(x); }));
    out.push_back(check_binary("gated_residual", seeds, s, D::kSigned, one, D::kSigned, [](auto& x, auto& gamma) {
      return gated_residual(x, gamma, square(x));
    }));
    out.push_back(check_unary("spectral_scale", seeds, {3, 2, 2, 2}, D::kSigned, [](auto& w) {
      const auto u = draw({1, 1, 1, 3}, 88), v = draw({1, 1, 1, 8}, 89);
      return spectral_scale(w, std::vector<double>(u.data().begin(), u.data().end()),
                            std::vector<double>(v.data().begin(), v.data().end()));
    }));

    Tally x{"generator objective wrt corrupted input"}, y{"generator objective wrt clean input"},
        p{"generator objective wrt generator parameters"};
    for (int seed = 0; seed < seeds; ++seed) check_objective(seed, x, y, p);
    out.push_back(x.result());
    out.push_back(y.result());
    out.push_back(p.result());
  });
}

SuiteResult verify_metrics(int pairs) {
  return timed("metrics", [&](SuiteResult& r) {
    const double c1 = (0.01 * kPeak) * (0.01 * kPeak), c2 = (0.03 * kPeak) * (0.03 * kPeak);
    const int scales = max_msssim_scales(64, 64);
    const MsSsimParams p;
    double worst[6] = {};
    Rng rng(2024);
    for (int i = 0; i < pairs; ++i) {
      const Image a = noise_image(64, rng);
      const Image b = perturbed(a, 10.0 + 20.0 * i, rng);
      worst[0] = std::max(worst[0], std::abs(ssim(a, b) - reference::ssim(a, b, c1, c2)));
      worst[1] = std::max(worst[1], std::abs(ms_ssim(a, b) - reference::ms_ssim(a, b, scales, c1, c2)));
      worst[2] = std::max(worst[2], std::abs(psnr(a, b) - reference::psnr(a, b)));
      worst[3] = std::max(worst[3], std::abs(mse(a, b) - reference::mse(a, b)));
      worst[4] = std::max(worst[4], std::abs(uqi(a, b) - reference::uqi(a, b)));
      Graph<double> g;
      const double got = ms_ssim(g.constant(unit_tensor(a)), g.constant(unit_tensor(b)), p).value().item();
      const double want = reference::ms_ssim(unit_image(a), unit_image(b), p.scales, p.c1, p.c2);
      worst[5] = std::max(worst[5], std::abs(got - want));
    }
    const char* names[6] = {"ssim", "ms_ssim", "psnr", "mse", "uqi", "differentiable ms_ssim"};
    for (int k = 0; k < 6; ++k)
      r.checks.push_back({names[k], worst[k] <= 1e-6,
                          std::to_string(pairs) + " pairs max_abs_diff=" + fmt(worst[k])});
  });
}

SuiteResult verify_spectral(int iterations, int trials) {
  return timed("spectral", [&](SuiteResult& r) {
    Rng shapes(11);
    for (int t = 0; t < trials; ++t) {
      const int64_t rows = 1 + static_cast<int64_t>(shapes.below(256));
      const int64_t cols = 1 + static_cast<int64_t>(shapes.below(256));
      const Tensor<double> w = draw({rows, cols, 1, 1}, 4000 + static_cast<uint64_t>(t));
      SpectralNormState<double> st;
      Rng rng(5000 + static_cast<uint64_t>(t));
      st.u.resize(static_cast<size_t>(rows));
      for (auto& e : st.u) e = rng.normal();
      const double top = dense_top_singular_value(spectral_normalize(st, w, iterations));
      r.checks.push_back({"top singular value " + std::to_string(rows) + "x" + std::to_string(cols),
                          top >= 0.99 && top <= 1.01, "sigma=" + fmt(top) + " after " +
                                                          std::to_string(iterations) + " iterations"});
    }
  });
}

SuiteResult verify_attention() {
  return timed("attention", [&](SuiteResult& r) {
    bool identity = true;
    for (int seed = 0; seed < 5; ++seed) {
      SelfAttentionBlock<float> sa("sa", 16);
      Rng rng(static_cast<uint64_t>(seed));
      for (auto* c : {&sa.query, &sa.key, &sa.value})
        for (float& v : c->weight.value.data()) v = static_cast<float>(rng.normal(0.0, 0.5));
      Tensor<float> x({2, 16, 5, 7});
      for (float& v : x.data()) v = static_cast<float>(rng.uniform(-3, 3));
      Graph<float> g;
      auto y = sa.forward(g, g.constant(x), {});
      identity = identity && std::memcmp(y.value().raw(), x.raw(), x.size() * sizeof(float)) == 0;
    }
    r.checks.push_back({"gamma = 0 is the bit-exact identity", identity, "5 random blocks"});

    double worst = 0;
    for (int seed = 0; seed < 5; ++seed) {
      SelfAttentionBlock<double> sa("sa", 8);
      Rng rng(100 + static_cast<uint64_t>(seed));
      for (auto* c : {&sa.query, &sa.key, &sa.value})
        for (double& v : c->weight.value.data()) v = rng.normal(0.0, 1.0);
      Graph<double> g;
      Var<double> attn;
      sa.forward(g, g.constant(draw({2, 8, 4, 6}, 200 + static_cast<uint64_t>(seed))), {}, &attn);
      const Shape s = attn.shape();
      for (int64_t n = 0; n < s.n; ++n)
        for (int64_t i = 0; i < s.h; ++i) {
          double row = 0;
          for (int64_t j = 0; j < s.w; ++j) row += attn.value().at(n, 0, i, j);
          worst = std::max(worst, std::abs(row - 1.0));
        }
    }
    r.checks.push_back({"attention rows sum to one", worst <= 1e-6, "max_abs_deviation=" + fmt(worst)});
  });
}

SuiteResult run_suite(const std::string& name) {
  if (name == "gradcheck") return verify_gradcheck();
  if (name == "metrics") return verify_metrics();
  if (name == "spectral") return verify_spectral();
  if (name == "attention") return verify_attention();
  throw ConfigError("unknown verify suite '" + name + "' (expected gradcheck, metrics, spectral or attention)");
}

}  // namespace cmgan
