// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/SVD>
#include <cmath>
#include <cstring>

#include "cmgan/checkpoint.hpp"
#include "cmgan/error.hpp"
#include "cmgan/gradcheck.hpp"
#include "cmgan/log.hpp"
#include "cmgan/nn.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cmgan;
using cmgan::testing::random_tensor;

namespace {

double dense_top_singular_value(const Tensor<double>& w) {
  const Shape s = w.shape();
  Eigen::MatrixXd m(s.n, s.c * s.h * s.w);
  for (int64_t i = 0; i < m.rows(); ++i)
    for (int64_t j = 0; j < m.cols(); ++j) m(i, j) = w[static_cast<size_t>(i * m.cols() + j)];
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

template <typename T>
void randomize(std::vector<Parameter<T>*> params, uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto* p : params)
    for (T& v : p->value.data()) v = static_cast<T>(rng.normal(0.0, scale));
}

Var<double> project(const Var<double>& y, uint64_t seed) {
  return sum(mul(y, y.graph().constant(random_tensor(y.shape(), seed))));
}

}  // namespace

TEST_CASE("self-attention at gamma = 0 is the bit-exact identity") {
  SelfAttentionBlock<float> sa("sa", 16);
  Rng rng(3);
  for (auto* c : {&sa.query, &sa.key, &sa.value})
    for (float& v : c->weight.value.data()) v = static_cast<float>(rng.normal(0.0, 0.5));
  REQUIRE(sa.gamma.value.item() == 0.0f);
  Tensor<float> x = random_tensor<float>({2, 16, 5, 7}, 4, -3, 3);
  x[0] = -0.0f;
  Graph<float> g;
  auto y = sa.forward(g, g.constant(x), {});
  CHECK(std::memcmp(y.value().raw(), x.raw(), x.size() * sizeof(float)) == 0);
}

TEST_CASE("attention rows sum to one") {
  SelfAttentionBlock<double> sa("sa", 8);
  randomize<double>({&sa.query.weight, &sa.key.weight, &sa.value.weight}, 5, 1.0);
  Graph<double> g;
  Var<double> attn;
  sa.forward(g, g.constant(random_tensor({2, 8, 4, 6}, 6, -2, 2)), {}, &attn);
  const Shape s = attn.shape();
  REQUIRE(s == Shape{2, 1, 24, 24});
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t i = 0; i < s.h; ++i) {
      double row = 0;
      for (int64_t j = 0; j < s.w; ++j) row += attn.value().at(n, 0, i, j);
      CHECK(std::abs(row - 1.0) <= 1e-6);
    }
}

TEST_CASE("self-attention configuration and gradients") {
  CHECK_THROWS_AS(SelfAttentionBlock<float>("sa", 12), ConfigError);
  for (int seed = 0; seed < 10; ++seed) {
    SelfAttentionBlock<double> sa("sa", 8);
    auto params = std::vector<Parameter<double>*>{};
    sa.collect(params);
    randomize(params, 20 + seed, 0.5);
    const auto x = random_tensor({1, 8, 6, 6}, 30 + seed);
    GradcheckReport r = gradcheck(
        [&](Graph<double>& g, const Var<double>& v) { return project(sa.forward(g, v, {}), seed); }, x);
    INFO(r.summary());
    CHECK(r.passed);
    GradcheckReport rp = gradcheck_params(
        [&](Graph<double>& g) { return project(sa.forward(g, g.constant(x), {}), seed); }, params);
    INFO(rp.summary());
    CHECK(rp.passed);
  }
}

TEST_CASE("spectral normalization of known matrices") {
  SpectralNormState<double> st{{0.6, 0.8}};
  Tensor<double> diag({2, 2, 1, 1}, std::vector<double>{2, 0, 0, 1});
  double sigma = 0;
  Tensor<double> wn = spectral_normalize(st, diag, 20, &sigma);
  CHECK(sigma >= 1.99);
  CHECK(sigma <= 2.01);
  CHECK(wn[0] == doctest::Approx(1.0).epsilon(0.01));
  CHECK(wn[3] == doctest::Approx(0.5).epsilon(0.01));
  double unorm = std::hypot(st.u[0], st.u[1]);
  CHECK(unorm == doctest::Approx(1.0).epsilon(1e-12));

  const double c = std::cos(0.3), s = std::sin(0.3);
  SpectralNormState<double> st2{{1.0, 0.0}};
  Tensor<double> rot({2, 2, 1, 1}, std::vector<double>{c, -s, s, c});
  spectral_normalize(st2, rot, 20, &sigma);
  CHECK(sigma >= 0.99);
  CHECK(sigma <= 1.01);
}

TEST_CASE("spectral normalization of a zero weight floors sigma and warns") {
  std::vector<std::string> warnings;
  auto old = set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  SpectralNormState<double> st{{1.0, 0.0, 0.0}};
  double sigma = 0;
  Tensor<double> out = spectral_normalize(st, Tensor<double>({3, 2, 1, 1}), 3, &sigma);
  set_warning_sink(old);
  CHECK(sigma == 1e-12);
  CHECK(warnings.size() == 1);
  for (double v : out.data()) CHECK(v == 0.0);
  CHECK(std::hypot(st.u[0], st.u[1], st.u[2]) == doctest::Approx(1.0));
}

TEST_CASE("power iteration matches the dense SVD oracle") {
  // Conv weight (64, 3, 7, 7) viewed as 64 x 147.
  {
    Tensor<double> w = random_tensor({64, 3, 7, 7}, 77);
    SpectralNormState<double> st;
    Rng rng(1);
    st.u.resize(64);
    for (auto& e : st.u) e = rng.normal();
    double sigma = 0;
    Tensor<double> wn = spectral_normalize(st, w, 20, &sigma);
    const double truth = dense_top_singular_value(w);
    CHECK(std::abs(sigma - truth) / truth <= 0.01);
    const double top = dense_top_singular_value(wn);
    CHECK(top >= 0.99);
    CHECK(top <= 1.01);
  }
}

TEST_CASE("normalized weights have unit top singular value after 100 power iterations") {
  Rng shapes(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t rows = 1 + static_cast<int64_t>(shapes.below(256));
    const int64_t cols = 1 + static_cast<int64_t>(shapes.below(256));
    Tensor<double> w = random_tensor({rows, cols, 1, 1}, 500 + trial);
    SpectralNormState<double> st;
    Rng rng(trial);
    st.u.resize(static_cast<size_t>(rows));
    for (auto& e : st.u) e = rng.normal();
    Tensor<double> wn = spectral_normalize(st, w, 100);
    const double top = dense_top_singular_value(wn);
    INFO(rows << "x" << cols << " top=" << top);
    CHECK(top >= 0.99);
    CHECK(top <= 1.01);
  }
}

TEST_CASE("generator shape and range contract") {
  Generator<float> gen("g", GeneratorConfig{});
  init_parameters(gen, 1);
  Graph<float> g;
  auto y = gen.forward(g, g.constant(random_tensor<float>({2, 1, 64, 64}, 2)), {false});
  CHECK(y.shape() == Shape{2, 1, 64, 64});
  for (float v : y.value().data()) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }
  Graph<float> g2;
  try {
    gen.forward(g2, g2.constant(Tensor<float>({1, 1, 30, 32})), {false});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("multiples of 4") != std::string::npos);
  }
  // Saturating inputs still stay in range.
  Graph<float> g3;
  auto big = gen.forward(g3, g3.constant(random_tensor<float>({1, 1, 16, 16}, 3, -50, 50)), {false});
  for (float v : big.value().data()) CHECK(std::abs(v) <= 1.0f);
}

TEST_CASE("generator forward is deterministic") {
  Generator<float> gen("g", GeneratorConfig{16, 2, true});
  init_parameters(gen, 9);
  for (auto* sa : gen.attention_blocks()) sa->gamma.value[0] = 0.5f;
  const auto x = random_tensor<float>({1, 1, 32, 32}, 4);
  Graph<float> a, b;
  CHECK(gen.forward(a, a.constant(x)).value() == gen.forward(b, b.constant(x)).value());
}

TEST_CASE("generator end-to-end gradcheck") {
  for (int seed = 0; seed < 10; ++seed) {
    Generator<double> gen("g", GeneratorConfig{8, 2, true});
    init_parameters(gen, 40 + seed, 0.1);
    for (auto* sa : gen.attention_blocks()) sa->gamma.value[0] = 0.3;
    const auto x = random_tensor({1, 1, 16, 16}, 50 + seed);
    GradcheckOptions opt;
    opt.seed = seed;
    opt.skip_kinks = true;
    GradcheckReport r = gradcheck(
        [&](Graph<double>& g, const Var<double>& v) { return project(gen.forward(g, v, {false}), seed); }, x, opt);
    INFO("input: " << r.summary());
    CHECK(r.passed);
    CHECK(r.entries.size() >= 64);
    opt.max_elements = 4;
    GradcheckReport rp = gradcheck_params(
        [&](Graph<double>& g) { return project(gen.forward(g, g.constant(x)), seed); }, gen.parameters(), opt);
    INFO("params: " << rp.summary());
    CHECK(rp.passed);
  }
}

TEST_CASE("discriminator shape contract") {
  PatchDiscriminator<float> d("d", DiscriminatorConfig{});
  init_parameters(d, 2);
  Graph<float> g;
  auto logits = d.forward(g, g.constant(random_tensor<float>({1, 1, 64, 64}, 3)), {false});
  CHECK(logits.shape() == Shape{1, 1, 8, 8});
  CHECK(logits.value().all_finite());
  Graph<float> g2;
  CHECK_THROWS_AS(d.forward(g2, g2.constant(Tensor<float>({1, 1, 4, 64})), {false}), ConfigError);
}

TEST_CASE("discriminator gradcheck at small scale") {
  for (int seed = 0; seed < 10; ++seed) {
    PatchDiscriminator<double> d("d", DiscriminatorConfig{8, 2, true});
    init_parameters(d, 60 + seed, 0.3);
    // Settle the singular-vector estimates, then freeze them for the check.
    {
      Graph<double> g;
      d.forward(g, g.constant(Tensor<double>({1, 1, 8, 8})), {false, true, 5});
    }
    Rng rng(seed);
    for (auto* p : d.parameters())
      if (p->name.ends_with(".bias")) for (double& v : p->value.data()) v = rng.normal(0.0, 0.1);
    d.parameters().back()->value[0] = 0.2;
    const auto x = random_tensor({1, 1, 12, 12}, 70 + seed);
    GradcheckOptions opt;
    opt.seed = seed;
    opt.skip_kinks = true;
    GradcheckReport r = gradcheck(
        [&](Graph<double>& g, const Var<double>& v) { return project(d.forward(g, v, {false}), seed); }, x, opt);
    INFO("input: " << r.summary());
    CHECK(r.passed);
    CHECK(r.entries.size() >= 64);
    opt.max_elements = 4;
    GradcheckReport rp = gradcheck_params(
        [&](Graph<double>& g) { return project(d.forward(g, g.constant(x)), seed); }, d.parameters(), opt);
    INFO("params: " << rp.summary());
    CHECK(rp.passed);
  }
}

TEST_CASE("spectral normalisation updates persist u") {
  PatchDiscriminator<float> d("d", DiscriminatorConfig{8, 2, false});
  init_parameters(d, 1);
  auto before = d.spectral_states().front()->u;
  Graph<float> g;
  d.forward(g, g.constant(random_tensor<float>({1, 1, 8, 8}, 1)), {false, false});
  CHECK(d.spectral_states().front()->u == before);
  Graph<float> g2;
  d.forward(g2, g2.constant(random_tensor<float>({1, 1, 8, 8}, 1)), {false, true});
  auto after = d.spectral_states().front()->u;
  CHECK(after != before);
  double norm = 0;
  for (float v : after) norm += double(v) * v;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("init_parameters") {
  Generator<float> a("g", GeneratorConfig{}), b("g", GeneratorConfig{});
  init_parameters(a, 7);
  init_parameters(b, 7);
  CHECK(parameter_hash(a.parameters()) == parameter_hash(b.parameters()));
  init_parameters(b, 8);
  CHECK(parameter_hash(a.parameters()) != parameter_hash(b.parameters()));

  for (auto* sa : a.attention_blocks()) CHECK(sa->gamma.value.item() == 0.0f);

  double sum = 0, sum_sq = 0;
  size_t count = 0;
  for (auto* p : a.parameters()) {
    if (p->name.ends_with(".bias")) {
      for (float v : p->value.data()) CHECK(v == 0.0f);
      continue;
    }
    if (p->name.ends_with(".gamma")) continue;
    for (float v : p->value.data()) {
      sum += v;
      sum_sq += double(v) * v;
      ++count;
    }
  }
  REQUIRE(count >= 10000);
  const double mean = sum / count;
  const double var = sum_sq / count - mean * mean;
  CHECK(std::abs(var - 0.02 * 0.02) <= 0.2 * 0.02 * 0.02);
}

TEST_CASE("CKPT-V1 parameter container") {
  Generator<float> gen("g1", GeneratorConfig{8, 1, true});
  init_parameters(gen, 3);
  Checkpoint ck;
  ck.set_meta("step", "12");
  store_parameters(ck, gen.parameters());
  const std::string bytes = ck.serialize();
  CHECK(bytes.rfind("CKPT-V1\nmeta step 12\ntensor g1.stem.weight 0 8 1 7 7\n", 0) == 0);

  Checkpoint back = Checkpoint::parse(bytes);
  CHECK(back.serialize() == bytes);
  CHECK(back.meta("step") == "12");
  Generator<float> other("g1", GeneratorConfig{8, 1, true});
  load_parameters(back, other.parameters());
  CHECK(parameter_hash(other.parameters()) == parameter_hash(gen.parameters()));

  Generator<float> wrong("g1", GeneratorConfig{16, 1, true});
  CHECK_THROWS_AS(load_parameters(back, wrong.parameters()), IoError);

  std::string bad = bytes;
  bad[6] = '9';
  CHECK_THROWS_AS(Checkpoint::parse(bad), VersionError);
  CHECK_THROWS_AS(Checkpoint::parse("garbage"), VersionError);
  CHECK_THROWS_AS(Checkpoint::parse(std::string_view(bytes).substr(0, bytes.size() - 3)), IoError);
  CHECK_THROWS_AS(Checkpoint::parse(std::string_view(bytes).substr(0, 30)), IoError);
}
