// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>

#include "cmgan/error.hpp"
#include "cmgan/gradcheck.hpp"
#include "cmgan/losses.hpp"
#include "cmgan/ops.hpp"
#include "cmgan/reference.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cmgan;
using cmgan::testing::random_tensor;

namespace {

double log_sigmoid_direct(double v) { return -std::log1p(std::exp(-v)); }

Image image_of(const Tensor<double>& t, int64_t n = 0) {
  const Shape s = t.shape();
  Image img(s.h, s.w);
  for (int64_t y = 0; y < s.h; ++y)
    for (int64_t x = 0; x < s.w; ++x) img.at(y, x) = t.at(n, 0, y, x);
  return img;
}

// Smooth image in [0, 1] plus a perturbed copy.
std::pair<Tensor<double>, Tensor<double>> correlated_pair(Shape s, uint64_t seed, double noise) {
  Rng rng(seed);
  Tensor<double> a(s), b(s);
  const double fx = rng.uniform(0.05, 0.4), fy = rng.uniform(0.05, 0.4), ph = rng.uniform(0, 6);
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t y = 0; y < s.h; ++y)
      for (int64_t x = 0; x < s.w; ++x) {
        const double v = 0.5 + 0.3 * std::sin(fx * x + ph) * std::cos(fy * y) + rng.uniform(-0.1, 0.1);
        a.at(n, 0, y, x) = std::clamp(v, 0.0, 1.0);
        b.at(n, 0, y, x) = std::clamp(v + rng.uniform(-noise, noise), 0.0, 1.0);
      }
  return {a, b};
}

std::vector<double> gram_direct(const Tensor<double>& f, int64_t n) {
  const Shape s = f.shape();
  std::vector<double> g(static_cast<size_t>(s.c * s.c));
  for (int64_t i = 0; i < s.c; ++i)
    for (int64_t j = 0; j < s.c; ++j) {
      double acc = 0;
      for (int64_t y = 0; y < s.h; ++y)
        for (int64_t x = 0; x < s.w; ++x) acc += f.at(n, i, y, x) * f.at(n, j, y, x);
      g[static_cast<size_t>(i * s.c + j)] = acc / static_cast<double>(s.h * s.w * s.c);
    }
  return g;
}

double style_direct(const Tensor<double>& a, const Tensor<double>& b) {
  const Shape s = a.shape();
  double total = 0;
  for (int64_t n = 0; n < s.n; ++n) {
    auto ga = gram_direct(a, n), gb = gram_direct(b, n);
    for (size_t k = 0; k < ga.size(); ++k) total += (ga[k] - gb[k]) * (ga[k] - gb[k]);
  }
  return total / static_cast<double>(s.n) / (4.0 * s.c * s.c);
}

double mean_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("adversarial losses closed forms") {
  Graph<double> g;
  auto zeros = g.constant(Tensor<double>({2, 1, 4, 4}));
  auto l = adversarial_losses(zeros, zeros);
  CHECK(l.d.value().item() == doctest::Approx(-2 * std::log(0.5)).epsilon(1e-12));
  CHECK(l.d.value().item() == doctest::Approx(1.3863).epsilon(1e-4));
  CHECK(l.g.value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  auto perfect = adversarial_losses(g.constant(Tensor<double>({1, 1, 4, 4}, 60.0)),
                                    g.constant(Tensor<double>({1, 1, 4, 4}, -60.0)));
  CHECK(perfect.d.value().item() >= 0);
  CHECK(perfect.d.value().item() < 1e-20);
  CHECK(std::isfinite(perfect.g.value().item()));
  CHECK(perfect.g.value().item() == doctest::Approx(60.0));
}

TEST_CASE("adversarial losses match per-element evaluation") {
  for (int seed = 0; seed < 10; ++seed) {
    auto real = random_tensor({2, 1, 5, 5}, seed, -8, 8), fake = random_tensor({2, 1, 5, 5}, 100 + seed, -8, 8);
    double d = 0, gen = 0;
    for (size_t i = 0; i < real.size(); ++i) {
      d -= log_sigmoid_direct(real[i]) + log_sigmoid_direct(-fake[i]);
      gen -= log_sigmoid_direct(fake[i]);
    }
    d /= static_cast<double>(real.size());
    gen /= static_cast<double>(real.size());
    Graph<double> g;
    auto l = adversarial_losses(g.constant(real), g.constant(fake));
    CHECK(l.d.value().item() == doctest::Approx(d).epsilon(1e-12));
    CHECK(l.g.value().item() == doctest::Approx(gen).epsilon(1e-12));

    auto r1 = gradcheck([&](Graph<double>& gg, const Var<double>& v) {
      return discriminator_loss(v, gg.constant(fake));
    }, real);
    auto r2 = gradcheck([&](Graph<double>& gg, const Var<double>& v) {
      return add(discriminator_loss(gg.constant(real), v), generator_adversarial_loss(v));
    }, fake);
    INFO(r1.summary() << " / " << r2.summary());
    CHECK(r1.passed);
    CHECK(r2.passed);
  }
}

TEST_CASE("cycle_l1") {
  Graph<double> g;
  auto x = g.constant(random_tensor({1, 1, 8, 8}, 1)), y = g.constant(random_tensor({1, 1, 8, 8}, 2));
  CHECK(cycle_l1(x, x, y, y).value().item() == 0.0);
  auto zero = g.constant(Tensor<double>({1, 1, 8, 8}));
  auto quarter = g.constant(Tensor<double>({1, 1, 8, 8}, 0.25));
  CHECK(cycle_l1(zero, quarter, y, y).value().item() == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(cycle_l1(x, g.constant(Tensor<double>({1, 1, 8, 4})), y, y), DimensionError);
  CHECK_THROWS_AS(cycle_l1(x, g.constant(Tensor<double>::scalar(0)), y, y), DimensionError);

  for (int seed = 0; seed < 10; ++seed) {
    auto a = random_tensor({2, 1, 16, 16}, seed), ac = random_tensor({2, 1, 16, 16}, 20 + seed);
    auto b = random_tensor({2, 1, 16, 16}, 40 + seed), bc = random_tensor({2, 1, 16, 16}, 60 + seed);
    Graph<double> gg;
    double got = cycle_l1(gg.constant(a), gg.constant(ac), gg.constant(b), gg.constant(bc)).value().item();
    CHECK(got == doctest::Approx(mean_abs_diff(a, ac) + mean_abs_diff(b, bc)).epsilon(1e-12));
    GradcheckOptions opt;
    opt.skip_kinks = true;
    auto r = gradcheck([&](Graph<double>& g2, const Var<double>& v) {
      return cycle_l1(g2.constant(a), v, g2.constant(b), g2.constant(bc));
    }, ac, opt);
    INFO(r.summary());
    CHECK(r.passed);
  }
}

TEST_CASE("gram matrix closed forms and properties") {
  Graph<double> g;
  auto ones = gram_matrix(g.constant(Tensor<double>({1, 2, 2, 2}, 1.0)));
  CHECK(ones.shape() == Shape{1, 1, 2, 2});
  for (double v : ones.value().data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

  Tensor<double> f({1, 2, 2, 2}, std::vector<double>{1, 0, 0, 0, 0, 2, 0, 0});
  auto gr = gram_matrix(g.constant(f)).value();
  CHECK(gr[0] == doctest::Approx(0.125));
  CHECK(gr[1] == 0.0);
  CHECK(gr[2] == 0.0);
  CHECK(gr[3] == doctest::Approx(0.5));

  for (int seed = 0; seed < 10; ++seed) {
    auto feat = random_tensor({2, 5, 4, 3}, seed, -2, 2);
    Graph<double> gg;
    auto m = gram_matrix(gg.constant(feat)).value();
    for (int64_t n = 0; n < 2; ++n) {
      auto direct = gram_direct(feat, n);
      Eigen::MatrixXd em(5, 5);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
          CHECK(m.at(n, 0, i, j) == doctest::Approx(direct[static_cast<size_t>(i * 5 + j)]).epsilon(1e-12));
          CHECK(m.at(n, 0, i, j) == m.at(n, 0, j, i));
          em(i, j) = m.at(n, 0, i, j);
        }
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(em).eigenvalues().minCoeff() >= -1e-12);
    }
    auto proj = random_tensor({2, 1, 5, 5}, 99 + seed);
    auto r = gradcheck([&](Graph<double>& g2, const Var<double>& v) {
      return sum(mul(gram_matrix(v), g2.constant(proj)));
    }, feat);
    INFO(r.summary());
    CHECK(r.passed);
  }
}

TEST_CASE("perceptual and style terms from hand-built features") {
  auto fx = random_tensor({1, 2, 3, 3}, 1), fxc = random_tensor({1, 2, 3, 3}, 2);
  auto fy = random_tensor({1, 2, 3, 3}, 3), fyc = random_tensor({1, 2, 3, 3}, 4);
  Graph<double> g;
  std::vector<Var<double>> vx{g.constant(fx)}, vxc{g.constant(fxc)}, vy{g.constant(fy)}, vyc{g.constant(fyc)};
  double p = perceptual_from_features(vx, vxc, vy, vyc, {0.7}).value().item();
  CHECK(p == doctest::Approx(0.7 * (mean_abs_diff(fx, fxc) + mean_abs_diff(fy, fyc))).epsilon(1e-12));
  double st = style_from_features(vx, vxc, vy, vyc, {0.3}).value().item();
  CHECK(st == doctest::Approx(0.3 * (style_direct(fx, fxc) + style_direct(fy, fyc))).epsilon(1e-12));

  CHECK(perceptual_from_features(vx, vx, vy, vy, {1.0}).value().item() == 0.0);
  CHECK(style_from_features(vx, vx, vy, vy, {1.0}).value().item() == 0.0);
  CHECK(perceptual_from_features(vx, vxc, vy, vyc, {0.0}).value().item() == 0.0);
  CHECK(style_from_features(vx, vxc, vy, vyc, {0.0}).value().item() == 0.0);
  CHECK_THROWS_AS(perceptual_from_features(vx, vxc, vy, vyc, {1.0, 1.0}), DimensionError);
}

TEST_CASE("style term for a single differing Gram entry") {
  // Channel 1 is zero wherever channel 0 changes, so only Gr(0,0) moves.
  const double a = 3.0, lambda = 0.4;
  Tensor<double> f({1, 2, 2, 2}, std::vector<double>{1, 0, 0, 0, 0, 2, 0, 0});
  Tensor<double> fc({1, 2, 2, 2}, std::vector<double>{a, 0, 0, 0, 0, 2, 0, 0});
  const double delta = (a * a - 1) / 8;
  Graph<double> g;
  std::vector<Var<double>> vx{g.constant(f)}, vxc{g.constant(fc)}, vy{g.constant(f)};
  double got = style_from_features(vx, vxc, vy, vy, {lambda}).value().item();
  CHECK(got == doctest::Approx(lambda * delta * delta / (4 * 2 * 2)).epsilon(1e-14));
}

TEST_CASE("style term is invariant to spatial permutations") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto fx = random_tensor({1, 4, 3, 5}, 10 + trial), fxc = random_tensor({1, 4, 3, 5}, 20 + trial);
    std::vector<size_t> perm(15);
    std::iota(perm.begin(), perm.end(), size_t{0});
    rng.shuffle(perm.begin(), perm.end());
    auto permute = [&](const Tensor<double>& t) {
      Tensor<double> out(t.shape());
      for (int64_t c = 0; c < 4; ++c)
        for (size_t k = 0; k < 15; ++k) out[static_cast<size_t>(c * 15) + perm[k]] = t[static_cast<size_t>(c * 15) + k];
      return out;
    };
    Graph<double> g;
    auto v = [&](const Tensor<double>& t) { return std::vector<Var<double>>{g.constant(t)}; };
    double base = style_from_features(v(fx), v(fxc), v(fx), v(fx), {1.0}).value().item();
    double perm_val = style_from_features(v(permute(fx)), v(permute(fxc)), v(fx), v(fx), {1.0}).value().item();
    CHECK(std::abs(base - perm_val) <= 1e-12 * std::max(1.0, base));
  }
}

TEST_CASE("perceptual and style gradchecks through the feature extractor") {
  FeatureExtractor<double> fe(3, 7);
  for (int seed = 0; seed < 10; ++seed) {
    auto x = random_tensor({1, 1, 16, 16}, seed), xc = random_tensor({1, 1, 16, 16}, 30 + seed);
    auto y = random_tensor({1, 1, 16, 16}, 60 + seed), yc = random_tensor({1, 1, 16, 16}, 90 + seed);
    GradcheckOptions opt;
    opt.skip_kinks = true;
    opt.seed = seed;
    auto rp = gradcheck([&](Graph<double>& g, const Var<double>& v) {
      return perceptual_from_features(fe.features(g, g.constant(x)), fe.features(g, v),
                                      fe.features(g, g.constant(y)), fe.features(g, g.constant(yc)),
                                      {0.2, 0.3, 0.5});
    }, xc, opt);
    auto rs = gradcheck([&](Graph<double>& g, const Var<double>& v) {
      return style_from_features(fe.features(g, g.constant(x)), fe.features(g, v),
                                 fe.features(g, g.constant(y)), fe.features(g, g.constant(yc)),
                                 {0.2, 0.3, 0.5});
    }, xc, opt);
    INFO(rp.summary() << " / " << rs.summary());
    CHECK(rp.passed);
    CHECK(rs.passed);
    CHECK(rp.entries.size() >= 128);
    CHECK(rs.entries.size() >= 128);
  }
}

TEST_CASE("ms_ssim identity, checkerboard and feasibility") {
  auto [a, b] = correlated_pair({1, 1, 64, 64}, 1, 0.2);
  Graph<double> g;
  MsSsimParams p;
  CHECK(ms_ssim(g.constant(a), g.constant(a), p).value().item() == doctest::Approx(1.0).epsilon(1e-6));

  Tensor<double> board({1, 1, 64, 64}), inverse({1, 1, 64, 64});
  for (int64_t y = 0; y < 64; ++y)
    for (int64_t x = 0; x < 64; ++x) {
      board.at(0, 0, y, x) = static_cast<double>((x + y) % 2);
      inverse.at(0, 0, y, x) = 1.0 - board.at(0, 0, y, x);
    }
  CHECK(ms_ssim(g.constant(board), g.constant(inverse), p).value().item() < 0.2);

  CHECK(max_msssim_scales(64, 64) == 3);
  CHECK(max_msssim_scales(176, 176) == 5);
  CHECK(max_msssim_scales(160, 176) == 4);
  CHECK(max_msssim_scales(161, 176) == 5);
  CHECK(max_msssim_scales(16, 16) == 1);
  CHECK(max_msssim_scales(10, 16) == 0);
  try {
    ms_ssim(g.constant(Tensor<double>({1, 1, 32, 32})), g.constant(Tensor<double>({1, 1, 32, 32})), p);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("at most 2") != std::string::npos);
  }
  CHECK(p.exponents() == std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3});
}

TEST_CASE("ms_ssim matches the reference implementation on 20 random pairs") {
  MsSsimParams p;
  for (int seed = 0; seed < 20; ++seed) {
    auto [a, b] = correlated_pair({1, 1, 64, 64}, 100 + seed, 0.05 + 0.05 * seed);
    Graph<double> g;
    double got = ms_ssim(g.constant(a), g.constant(b), p).value().item();
    double want = reference::ms_ssim(image_of(a), image_of(b), 3, p.c1, p.c2);
    CHECK(std::abs(got - want) <= 1e-6);
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
  // Odd sizes exercise the reflected pooling.
  auto [a, b] = correlated_pair({1, 1, 45, 47}, 7, 0.2);
  Graph<double> g;
  double got = ms_ssim(g.constant(a), g.constant(b), p).value().item();
  CHECK(std::abs(got - reference::ms_ssim(image_of(a), image_of(b), 3, p.c1, p.c2)) <= 1e-6);
}

TEST_CASE("msssim_cycle_loss") {
  MsSsimParams p;
  auto [a, b] = correlated_pair({1, 1, 64, 64}, 3, 0.3);
  auto [c, d] = correlated_pair({1, 1, 64, 64}, 4, 0.1);
  auto signed_range = [](Tensor<double> t) {
    for (double& v : t.data()) v = 2 * v - 1;
    return t;
  };
  Graph<double> g;
  auto x = g.constant(signed_range(a)), xc = g.constant(signed_range(b));
  auto y = g.constant(signed_range(c)), yc = g.constant(signed_range(d));
  CHECK(msssim_cycle_loss(x, x, y, y, p).value().item() == doctest::Approx(0.0).epsilon(1e-6));
  const double m = reference::ms_ssim(image_of(a), image_of(b), 3, p.c1, p.c2);
  CHECK(msssim_cycle_loss(x, xc, y, y, p).value().item() == doctest::Approx(1.0 - m).epsilon(1e-6));
  const double m2 = reference::ms_ssim(image_of(c), image_of(d), 3, p.c1, p.c2);
  CHECK(std::abs(msssim_cycle_loss(x, xc, y, yc, p).value().item() - (2.0 - m - m2)) <= 1e-6);
}

TEST_CASE("ms_ssim gradchecks") {
  for (int seed = 0; seed < 10; ++seed) {
    auto [a, b] = correlated_pair({1, 1, 16, 16}, 200 + seed, 0.3);
    MsSsimParams one;
    one.scales = 1;
    auto r = gradcheck([&](Graph<double>& g, const Var<double>& v) {
      return ms_ssim(g.constant(a), v, one);
    }, b);
    auto [c, d] = correlated_pair({1, 1, 24, 24}, 300 + seed, 0.3);
    MsSsimParams two;
    two.scales = 2;
    auto r2 = gradcheck([&](Graph<double>& g, const Var<double>& v) {
      return ms_ssim(g.constant(c), v, two);
    }, d);
    INFO(r.summary() << " / " << r2.summary());
    CHECK(r.passed);
    CHECK(r2.passed);
  }
}

TEST_CASE("total cycle loss weighting") {
  LossWeights w;
  CHECK(total_cycle_loss({1, 1, 1, 1}, w) == doctest::Approx(12.1).epsilon(1e-12));
  LossWeights neg;
  neg.cstyle = -0.1;
  CHECK_THROWS_AS(total_cycle_loss({1, 1, 1, 1}, neg), ConfigError);
  LossWeights bad_layers;
  bad_layers.layer_cp = {0.5, 0.5};
  CHECK_THROWS_AS(bad_layers.validate(3), ConfigError);

  FeatureExtractor<double> fe(3, 1);
  auto x = random_tensor({1, 1, 32, 32}, 1), xc = random_tensor({1, 1, 32, 32}, 2);
  auto y = random_tensor({1, 1, 32, 32}, 3), yc = random_tensor({1, 1, 32, 32}, 4);
  MsSsimParams p;
  p.scales = 2;

  Graph<double> g;
  CycleTensors<double> t{g.constant(x), g.constant(xc), g.constant(y), g.constant(yc)};
  LossWeights only_l1{1, 0, 0, 0, {}, {}};
  CycleLoss<double> ablated = total_cycle_loss(fe, t, only_l1, p);
  CHECK(ablated.total.value().item() == cycle_l1(t.x, t.x_cyc, t.y, t.y_cyc).value().item());
  CHECK(ablated.components()[1] == 0.0);
  CHECK(ablated.components()[2] == 0.0);
  CHECK(ablated.components()[3] == 0.0);

  LossWeights cyclegan = w;
  cyclegan.msssim = cyclegan.cpercep = cyclegan.cstyle = 0;
  CHECK(total_cycle_loss(fe, t, cyclegan, p).total.value().item() ==
        10.0 * cycle_l1(t.x, t.x_cyc, t.y, t.y_cyc).value().item());

  CycleLoss<double> full = total_cycle_loss(fe, t, w, p);
  auto comp = full.components();
  for (double c : comp) {
    CHECK(c >= 0.0);
    CHECK(std::isfinite(c));
  }
  CHECK(full.total.value().item() == doctest::Approx(total_cycle_loss(comp, w)).epsilon(1e-12));

  Graph<double> g2;
  CycleTensors<double> same{g2.constant(x), g2.constant(x), g2.constant(y), g2.constant(y)};
  for (double c : total_cycle_loss(fe, same, w, p).components()) CHECK(c == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("total cycle loss gradcheck at 16x16") {
  FeatureExtractor<double> fe(3, 11);
  MsSsimParams p;
  p.scales = 1;
  LossWeights w;
  for (int seed = 0; seed < 10; ++seed) {
    auto x = random_tensor({1, 1, 16, 16}, seed, -0.9, 0.9), xc = random_tensor({1, 1, 16, 16}, 30 + seed, -0.9, 0.9);
    auto y = random_tensor({1, 1, 16, 16}, 60 + seed, -0.9, 0.9), yc = random_tensor({1, 1, 16, 16}, 90 + seed, -0.9, 0.9);
    GradcheckOptions opt;
    opt.skip_kinks = true;
    opt.seed = seed;
    auto r = gradcheck([&](Graph<double>& g, const Var<double>& v) {
      return total_cycle_loss(fe, CycleTensors<double>{g.constant(x), v, g.constant(y), g.constant(yc)}, w, p).total;
    }, xc, opt);
    INFO(r.summary());
    CHECK(r.passed);
    CHECK(r.entries.size() >= 128);
  }
}

TEST_CASE("feature extractor contract") {
  FeatureExtractor<float> a(3, 5), b(3, 5);
  auto x = random_tensor<float>({1, 1, 64, 64}, 1);
  Graph<float> ga, gb;
  auto fa = a.features(ga, ga.constant(x));
  auto fb = b.features(gb, gb.constant(x));
  REQUIRE(fa.size() == 3);
  const int64_t sizes[] = {32, 16, 8};
  const int64_t channels[] = {16, 32, 64};
  for (int i = 0; i < 3; ++i) {
    CHECK(fa[i].shape() == Shape{1, channels[i], sizes[i], sizes[i]});
    CHECK(fa[i].value() == fb[i].value());
  }
  CHECK_THROWS_AS(FeatureExtractor<float>(0, 1), ConfigError);
  CHECK_THROWS_AS(FeatureExtractor<float>(5, 1), ConfigError);
  CHECK(FeatureExtractor<float>(4, 1).layers() == 4);

  FeatureExtractorConfig cfg;
  cfg.mode = FeatureMode::kAutoencoderPretrained;
  CHECK_THROWS_AS(build_feature_extractor<float>(cfg), ConfigError);
  std::vector<Tensor<float>> none;
  CHECK_THROWS_AS(build_feature_extractor<float>(cfg, &none), ConfigError);
}

TEST_CASE("feature extractor weights never receive gradients") {
  FeatureExtractor<double> fe(2, 3);
  std::vector<Tensor<double>> before;
  for (auto* p : fe.parameters()) before.push_back(p->value);
  Graph<double> g;
  auto x = g.leaf(random_tensor({1, 1, 16, 16}, 1));
  auto loss = style_from_features(fe.features(g, x), fe.features(g, g.constant(random_tensor({1, 1, 16, 16}, 2))),
                                  fe.features(g, x), fe.features(g, x), {1.0, 1.0});
  auto grads = g.backward(loss);
  CHECK(grads.count(x.id()) == 1);
  size_t i = 0;
  for (auto* p : fe.parameters()) {
    CHECK(p->value == before[i++]);
    for (double v : p->grad.data()) CHECK(v == 0.0);
  }
}

TEST_CASE("autoencoder pretraining lowers the reconstruction loss") {
  std::vector<Tensor<float>> clean;
  for (int k = 0; k < 6; ++k) {
    auto [a, b] = correlated_pair({1, 1, 16, 16}, 500 + k, 0.0);
    Tensor<float> t({1, 1, 16, 16});
    for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(2 * a[i] - 1);
    clean.push_back(t);
  }
  FeatureExtractorConfig cfg;
  cfg.mode = FeatureMode::kAutoencoderPretrained;
  cfg.layers = 2;
  cfg.pretrain_steps = 60;
  cfg.seed = 4;
  PretrainReport rep;
  auto fe = build_feature_extractor<float>(cfg, &clean, &rep);
  INFO(rep.initial_loss << " -> " << rep.final_loss);
  CHECK(rep.final_loss < rep.initial_loss);
  FeatureExtractor<float> fresh(2, 4);
  CHECK(fe.parameters()[0]->value != fresh.parameters()[0]->value);

  auto again = build_feature_extractor<float>(cfg, &clean);
  CHECK(again.parameters()[1]->value == fe.parameters()[1]->value);
}
