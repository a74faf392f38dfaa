// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cmgan/error.hpp"
#include "cmgan/image.hpp"

namespace cmgan {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
  if (!(adam.lr > 0)) throw ConfigError("learning rate must be > 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (!(adam.eps > 0)) throw ConfigError("adam eps must be > 0");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (replay_capacity < 0) throw ConfigError("replay capacity must be >= 0");
  if (spectral_iterations < 1) throw ConfigError("spectral iterations must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (!(init_stddev > 0)) throw ConfigError("init_stddev must be > 0");
  if (image_size < 4 || image_size % 4 != 0)
    throw ConfigError("image_size must be a positive multiple of 4, got " + std::to_string(image_size));
  if (image_size < (int64_t{1} << discriminator.stages))
    throw ConfigError("image_size " + std::to_string(image_size) + " is below the discriminator minimum " +
                      std::to_string(int64_t{1} << discriminator.stages));
  if (image_size % (int64_t{1} << features.layers) != 0)
    throw ConfigError("image_size must be a multiple of 2^feature_layers");
  weights.validate(features.layers);
  if (weights.msssim > 0) {
    const int max_scales = max_msssim_scales(image_size, image_size, msssim.window);
    if (msssim.scales < 1 || msssim.scales > max_scales)
      throw ConfigError("image " + std::to_string(image_size) + "x" + std::to_string(image_size) +
                        " supports at most " + std::to_string(max_scales) + " MS-SSIM scale(s), got " +
                        std::to_string(msssim.scales));
  }
}

namespace {

// Everything but the learning-rate sign, so that a zero rate can drive a step.
void validate_for_step(TrainConfig cfg) {
  if (cfg.adam.lr < 0) throw ConfigError("learning rate must be >= 0");
  cfg.adam.lr = 1;
  cfg.validate();
}

template <typename T>
Tensor<T> slice(const Tensor<T>& batch, int64_t i) {
  const Shape s = batch.shape();
  const auto per = static_cast<size_t>(s.c * s.h * s.w);
  std::vector<T> data(batch.raw() + i * static_cast<int64_t>(per), batch.raw() + (i + 1) * static_cast<int64_t>(per));
  return Tensor<T>(Shape{1, s.c, s.h, s.w}, std::move(data));
}

template <typename T>
Tensor<T> stack(const std::vector<const Tensor<T>*>& items) {
  const Shape s = items.front()->shape();
  std::vector<T> data;
  data.reserve(items.size() * static_cast<size_t>(s.numel()));
  for (const Tensor<T>* t : items) data.insert(data.end(), t->raw(), t->raw() + t->size());
  return Tensor<T>(Shape{static_cast<int64_t>(items.size()), s.c, s.h, s.w}, std::move(data));
}

std::string encode_tags(const std::vector<Provenance>& tags) {
  std::ostringstream os;
  for (size_t i = 0; i < tags.size(); ++i) os << (i ? " " : "") << tags[i].step << ':' << tags[i].index;
  return os.str();
}

std::vector<Provenance> decode_tags(const std::string& s) {
  std::vector<Provenance> out;
  std::istringstream is(s);
  for (std::string tok; is >> tok;) {
    const size_t colon = tok.find(':');
    if (colon == std::string::npos) throw IoError("malformed replay-buffer tag '" + tok + "'");
    out.push_back({std::stoll(tok.substr(0, colon)), std::stoll(tok.substr(colon + 1))});
  }
  return out;
}

void check_finite(double v, const char* component) {
  if (!std::isfinite(v))
    throw NumericalError(component, std::string("non-finite ") + component + " (" + std::to_string(v) + ")");
}

// Runs `fn`, reporting any non-finite intermediate as a failure of `component`.
template <typename Fn>
auto guarded(const char* component, Fn fn) {
  try {
    return fn();
  } catch (const DomainError& e) {
    throw NumericalError(component, std::string(component) + ": " + e.what());
  }
}

template <typename T>
void store_adam(Checkpoint& ck, const std::string& prefix, const AdamState& s,
                const std::vector<Parameter<T>*>& params) {
  ck.set_meta(prefix + ".step", std::to_string(s.step));
  ck.set_meta(prefix + ".sized", s.m.empty() ? "0" : "1");
  for (size_t k = 0; k < s.m.size(); ++k) {
    const Shape shape = params[k]->value.shape();
    ck.add64(prefix + "." + params[k]->name + ".m", Tensor<double>(shape, s.m[k]));
    ck.add64(prefix + "." + params[k]->name + ".v", Tensor<double>(shape, s.v[k]));
  }
}

template <typename T>
AdamState load_adam(const Checkpoint& ck, const std::string& prefix, const std::vector<Parameter<T>*>& params) {
  AdamState s;
  s.step = std::stoll(ck.meta(prefix + ".step"));
  if (ck.meta(prefix + ".sized") == "0") return s;
  for (const Parameter<T>* p : params) {
    const Tensor<double>& m = ck.get64(prefix + "." + p->name + ".m");
    const Tensor<double>& v = ck.get64(prefix + "." + p->name + ".v");
    if (m.shape() != p->value.shape() || v.shape() != p->value.shape())
      throw IoError("optimizer moments for " + p->name + " do not match the parameter shape");
    s.m.emplace_back(m.data().begin(), m.data().end());
    s.v.emplace_back(v.data().begin(), v.data().end());
  }
  return s;
}

template <typename T>
void store_spectral(Checkpoint& ck, const std::string& prefix, PatchDiscriminator<T>& d) {
  auto states = d.spectral_states();
  for (size_t i = 0; i < states.size(); ++i) {
    const auto& u = states[i]->u;
    ck.add(prefix + ".spectral" + std::to_string(i) + ".u",
           Tensor<T>(Shape{1, 1, 1, static_cast<int64_t>(u.size())}, u).template cast<float>());
  }
}

template <typename T>
void load_spectral(const Checkpoint& ck, const std::string& prefix, PatchDiscriminator<T>& d) {
  auto states = d.spectral_states();
  for (size_t i = 0; i < states.size(); ++i) {
    const Tensor<float>& t = ck.get(prefix + ".spectral" + std::to_string(i) + ".u");
    if (t.size() != states[i]->u.size()) throw IoError("spectral state size mismatch in " + prefix);
    const Tensor<T> v = t.cast<T>();
    states[i]->u.assign(v.data().begin(), v.data().end());
  }
}

ForwardOptions trainable() { return ForwardOptions{true, false, 1}; }
ForwardOptions frozen() { return ForwardOptions{false, false, 1}; }

template <typename T>
struct CycleForward {
  Var<T> fake_x, fake_y, x_cyc, y_cyc;
};

template <typename T>
CycleForward<T> cycle_forward(Graph<T>& g, CycleModel<T>& m, const Var<T>& x, const Var<T>& y) {
  CycleForward<T> f;
  f.fake_y = m.g1.forward(g, x, trainable());
  f.fake_x = m.g2.forward(g, y, trainable());
  f.x_cyc = m.g2.forward(g, f.fake_y, trainable());
  f.y_cyc = m.g1.forward(g, f.fake_x, trainable());
  return f;
}

template <typename T>
Var<T> adversarial_term(Graph<T>& g, CycleModel<T>& m, const CycleForward<T>& f) {
  return add(generator_adversarial_loss(m.d1.forward(g, f.fake_y, frozen())),
             generator_adversarial_loss(m.d2.forward(g, f.fake_x, frozen())));
}

}  // namespace

// ---------------------------------------------------------------------------
// Model

template <typename T>
CycleModel<T>::CycleModel(const TrainConfig& cfg, const std::vector<Tensor<T>>* clean)
    : g1("g1", cfg.generator),
      g2("g2", cfg.generator),
      d1("d1", cfg.discriminator),
      d2("d2", cfg.discriminator),
      fe(build_feature_extractor<T>(cfg.features, clean)) {
  init_parameters(g1, splitmix64(cfg.seed ^ 0x11), cfg.init_stddev);
  init_parameters(g2, splitmix64(cfg.seed ^ 0x12), cfg.init_stddev);
  init_parameters(d1, splitmix64(cfg.seed ^ 0x21), cfg.init_stddev);
  init_parameters(d2, splitmix64(cfg.seed ^ 0x22), cfg.init_stddev);
}

// ---------------------------------------------------------------------------
// Replay buffer

template <typename T>
Tensor<T> ReplayBuffer<T>::query(const Tensor<T>& batch, int64_t step, std::vector<Provenance>* tags) {
  const int64_t n = batch.shape().n;
  std::vector<Tensor<T>> chosen;
  std::vector<Provenance> chosen_tags;
  const size_t stored_before = entries_.size();
  for (int64_t i = 0; i < n; ++i) {
    Entry incoming{slice(batch, i), Provenance{step, i}};
    if (capacity_ <= 0) {
      chosen.push_back(std::move(incoming.image));
      chosen_tags.push_back(incoming.tag);
    } else if (entries_.size() < static_cast<size_t>(capacity_)) {
      if (stored_before > 0) {
        const Entry& old = entries_[rng_.below(stored_before)];
        chosen.push_back(old.image);
        chosen_tags.push_back(old.tag);
      } else {
        chosen.push_back(incoming.image);
        chosen_tags.push_back(incoming.tag);
      }
      entries_.push_back(std::move(incoming));
    } else if (rng_.uniform() < 0.5) {
      Entry& slot = entries_[rng_.below(entries_.size())];
      chosen.push_back(slot.image);
      chosen_tags.push_back(slot.tag);
      slot = std::move(incoming);
    } else {
      chosen.push_back(std::move(incoming.image));
      chosen_tags.push_back(incoming.tag);
    }
  }
  std::vector<const Tensor<T>*> ptrs;
  for (const auto& t : chosen) ptrs.push_back(&t);
  if (tags) *tags = std::move(chosen_tags);
  return stack(ptrs);
}

template <typename T>
void ReplayBuffer<T>::save(Checkpoint& ck, const std::string& prefix) const {
  ck.set_meta(prefix + ".capacity", std::to_string(capacity_));
  ck.set_meta(prefix + ".size", std::to_string(entries_.size()));
  ck.set_meta(prefix + ".rng", rng_.state());
  std::vector<Provenance> tags;
  for (size_t i = 0; i < entries_.size(); ++i) {
    ck.add(prefix + "." + std::to_string(i), entries_[i].image.template cast<float>());
    tags.push_back(entries_[i].tag);
  }
  ck.set_meta(prefix + ".tags", encode_tags(tags));
}

template <typename T>
void ReplayBuffer<T>::load(const Checkpoint& ck, const std::string& prefix) {
  if (std::stoi(ck.meta(prefix + ".capacity")) != capacity_)
    throw IoError("replay buffer " + prefix + " capacity differs from the configuration");
  const auto size = static_cast<size_t>(std::stoll(ck.meta(prefix + ".size")));
  const std::vector<Provenance> tags = decode_tags(ck.meta(prefix + ".tags"));
  if (tags.size() != size) throw IoError("replay buffer " + prefix + " tag count mismatch");
  rng_.restore(ck.meta(prefix + ".rng"));
  entries_.clear();
  for (size_t i = 0; i < size; ++i)
    entries_.push_back({ck.get(prefix + "." + std::to_string(i)).cast<T>(), tags[i]});
}

// ---------------------------------------------------------------------------
// Objective

template <typename T>
GeneratorObjective<T> generator_objective(Graph<T>& g, CycleModel<T>& model, const Var<T>& x, const Var<T>& y,
                                          const TrainConfig& cfg, Var<T>* fake_x, Var<T>* fake_y) {
  const CycleForward<T> f = cycle_forward(g, model, x, y);
  GeneratorObjective<T> obj;
  obj.adv = adversarial_term(g, model, f);
  obj.cycle = total_cycle_loss(model.fe, CycleTensors<T>{x, f.x_cyc, y, f.y_cyc}, cfg.weights, cfg.msssim);
  obj.total = add(obj.adv, obj.cycle.total);
  if (fake_x) *fake_x = f.fake_x;
  if (fake_y) *fake_y = f.fake_y;
  return obj;
}

// ---------------------------------------------------------------------------
// Trainer

template <typename T>
Trainer<T>::Trainer(const TrainConfig& cfg, const std::vector<Tensor<T>>* clean)
    : cfg_((validate_for_step(cfg), cfg)),
      model_(cfg, clean),
      buffer_x_(cfg.replay_capacity, splitmix64(cfg.seed ^ 0x31)),
      buffer_y_(cfg.replay_capacity, splitmix64(cfg.seed ^ 0x32)) {}

template <typename T>
std::vector<Parameter<T>*> Trainer<T>::generator_parameters() {
  auto a = model_.g1.parameters();
  auto b = model_.g2.parameters();
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

template <typename T>
std::vector<Parameter<T>*> Trainer<T>::discriminator_parameters() {
  auto a = model_.d1.parameters();
  auto b = model_.d2.parameters();
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

template <typename T>
StepReport Trainer<T>::train_step(const Tensor<T>& batch_x, const Tensor<T>& batch_y) {
  const Shape sx = batch_x.shape(), sy = batch_y.shape();
  if (sx != sy || sx.c != 1 || sx.h != cfg_.image_size || sx.w != cfg_.image_size)
    throw DimensionError("train_step expects two (n, 1, " + std::to_string(cfg_.image_size) + ", " +
                         std::to_string(cfg_.image_size) + ") batches, got " + sx.str() + " and " + sy.str());
  StepReport r;
  r.step = step_ + 1;

  Graph<T> gg;
  const Var<T> x = gg.constant(batch_x), y = gg.constant(batch_y);
  const CycleForward<T> f = guarded("generator", [&] { return cycle_forward(gg, model_, x, y); });

  // Discriminators on real batches against pooled fakes.
  const Tensor<T> pool_y = buffer_y_.query(f.fake_y.value(), step_);
  const Tensor<T> pool_x = buffer_x_.query(f.fake_x.value(), step_);
  {
    Graph<T> gd;
    const ForwardOptions update{true, true, cfg_.spectral_iterations};
    const ForwardOptions reuse{true, false, cfg_.spectral_iterations};
    const Var<T> l1 = guarded("loss_d1", [&] {
      const Var<T> real = model_.d1.forward(gd, gd.constant(batch_y), update);
      return discriminator_loss(real, model_.d1.forward(gd, gd.constant(pool_y), reuse));
    });
    const Var<T> l2 = guarded("loss_d2", [&] {
      const Var<T> real = model_.d2.forward(gd, gd.constant(batch_x), update);
      return discriminator_loss(real, model_.d2.forward(gd, gd.constant(pool_x), reuse));
    });
    r.loss_d1 = static_cast<double>(l1.value().item());
    r.loss_d2 = static_cast<double>(l2.value().item());
    check_finite(r.loss_d1, "loss_d1");
    check_finite(r.loss_d2, "loss_d2");
    auto p1 = model_.d1.parameters(), p2 = model_.d2.parameters();
    zero_grads(p1);
    zero_grads(p2);
    gd.backward(add(l1, l2));
    r.grad_norm_d1 = grad_norm(p1);
    r.grad_norm_d2 = grad_norm(p2);
    check_finite(r.grad_norm_d1, "grad_d1");
    check_finite(r.grad_norm_d2, "grad_d2");
    adam_update(p1, adam_d1_, cfg_.adam);
    adam_update(p2, adam_d2_, cfg_.adam);
  }
  if (hook_) hook_(Phase::kDiscriminators);

  // Generators jointly, against the updated discriminators.
  const Var<T> adv = guarded("loss_g_adv", [&] { return adversarial_term(gg, model_, f); });
  const CycleLoss<T> cyc = guarded("total", [&] {
    return total_cycle_loss(model_.fe, CycleTensors<T>{x, f.x_cyc, y, f.y_cyc}, cfg_.weights, cfg_.msssim);
  });
  r.loss_g_adv = static_cast<double>(adv.value().item());
  const auto comps = cyc.components();
  r.l_cyc = comps[0];
  r.l_msssim = comps[1];
  r.l_cpercep = comps[2];
  r.l_cstyle = comps[3];
  r.total = static_cast<double>(cyc.total.value().item());
  check_finite(r.loss_g_adv, "loss_g_adv");
  check_finite(r.l_cyc, "l_cyc");
  check_finite(r.l_msssim, "l_msssim");
  check_finite(r.l_cpercep, "l_cpercep");
  check_finite(r.l_cstyle, "l_cstyle");
  check_finite(r.total, "total");
  auto pg1 = model_.g1.parameters(), pg2 = model_.g2.parameters();
  zero_grads(pg1);
  zero_grads(pg2);
  gg.backward(add(adv, cyc.total));
  auto pg = generator_parameters();
  r.grad_norm_g = grad_norm(pg);
  check_finite(r.grad_norm_g, "grad_g");
  adam_update(pg1, adam_g1_, cfg_.adam);
  adam_update(pg2, adam_g2_, cfg_.adam);
  if (hook_) hook_(Phase::kGenerators);

  ++step_;
  return r;
}

template <typename T>
Checkpoint Trainer<T>::checkpoint() const {
  auto& self = const_cast<Trainer<T>&>(*this);
  Checkpoint ck;
  ck.set_meta("kind", "cmgan-trainer");
  ck.set_meta("step", std::to_string(step_));
  ck.set_meta("seed", std::to_string(cfg_.seed));
  ck.set_meta("generator", std::to_string(cfg_.generator.base_channels) + " " +
                               std::to_string(cfg_.generator.residual_blocks) + " " +
                               (cfg_.generator.attention ? "1" : "0"));
  store_parameters(ck, self.model_.g1.parameters());
  store_parameters(ck, self.model_.g2.parameters());
  store_parameters(ck, self.model_.d1.parameters());
  store_parameters(ck, self.model_.d2.parameters());
  store_parameters(ck, self.model_.fe.parameters());
  store_spectral(ck, "d1", self.model_.d1);
  store_spectral(ck, "d2", self.model_.d2);
  store_adam(ck, "adam.g1", adam_g1_, self.model_.g1.parameters());
  store_adam(ck, "adam.g2", adam_g2_, self.model_.g2.parameters());
  store_adam(ck, "adam.d1", adam_d1_, self.model_.d1.parameters());
  store_adam(ck, "adam.d2", adam_d2_, self.model_.d2.parameters());
  buffer_x_.save(ck, "replay.x");
  buffer_y_.save(ck, "replay.y");
  return ck;
}

template <typename T>
void Trainer<T>::restore(const Checkpoint& ck) {
  if (!ck.has_meta("kind") || ck.meta("kind") != "cmgan-trainer")
    throw IoError("checkpoint does not hold a training state");
  load_parameters(ck, model_.g1.parameters());
  load_parameters(ck, model_.g2.parameters());
  load_parameters(ck, model_.d1.parameters());
  load_parameters(ck, model_.d2.parameters());
  load_parameters(ck, model_.fe.parameters());
  load_spectral(ck, "d1", model_.d1);
  load_spectral(ck, "d2", model_.d2);
  adam_g1_ = load_adam(ck, "adam.g1", model_.g1.parameters());
  adam_g2_ = load_adam(ck, "adam.g2", model_.g2.parameters());
  adam_d1_ = load_adam(ck, "adam.d1", model_.d1.parameters());
  adam_d2_ = load_adam(ck, "adam.d2", model_.d2.parameters());
  buffer_x_.load(ck, "replay.x");
  buffer_y_.load(ck, "replay.y");
  step_ = std::stoll(ck.meta("step"));
  // The data order of a resumed run follows the seed it started with.
  cfg_.seed = std::stoull(ck.meta("seed"));
}

// ---------------------------------------------------------------------------
// Fit

int64_t steps_per_epoch(size_t nx, size_t ny, int batch_size) {
  const auto n = static_cast<int64_t>(std::max(nx, ny));
  return (n + batch_size - 1) / batch_size;
}

int64_t total_steps(const TrainConfig& cfg, size_t nx, size_t ny) {
  const int64_t all = steps_per_epoch(nx, ny, cfg.batch_size) * cfg.epochs;
  return cfg.max_steps > 0 ? std::min(all, cfg.max_steps) : all;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> batch_for_step(const Dataset<T>& data, const TrainConfig& cfg, int64_t step) {
  if (data.x.empty() || data.y.empty())
    throw ConfigError(std::string("training domain ") + (data.x.empty() ? "X (corrupted)" : "Y (clean)") +
                      " is empty");
  const int64_t spe = steps_per_epoch(data.x.size(), data.y.size(), cfg.batch_size);
  const auto epoch = static_cast<uint64_t>(step / spe);
  const int64_t pos = step % spe;
  auto pick = [&](const std::vector<Tensor<T>>& domain, uint64_t salt) {
    std::vector<size_t> perm(domain.size());
    std::iota(perm.begin(), perm.end(), size_t{0});
    Rng rng(splitmix64(cfg.seed ^ splitmix64(epoch * 2 + salt)));
    rng.shuffle(perm.begin(), perm.end());
    std::vector<const Tensor<T>*> items;
    for (int b = 0; b < cfg.batch_size; ++b)
      items.push_back(&domain[perm[static_cast<size_t>(pos * cfg.batch_size + b) % perm.size()]]);
    return stack(items);
  };
  return {pick(data.x, 0), pick(data.y, 1)};
}

std::string train_log_header() { return "step,loss_d1,loss_d2,loss_g_adv,l_cyc,l_msssim,l_cpercep,l_cstyle,total"; }

std::string train_log_row(const StepReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(r.step),
                r.loss_d1, r.loss_d2, r.loss_g_adv, r.l_cyc, r.l_msssim, r.l_cpercep, r.l_cstyle, r.total);
  return buf;
}

namespace {

// Keeps the header and rows for steps <= `step`.
std::string truncated_log(const std::string& path, int64_t step) {
  std::ifstream in(path);
  std::string out = train_log_header() + "\n";
  std::string line;
  if (!std::getline(in, line)) return out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) > step) break;
    out += line + "\n";
  }
  return out;
}

}  // namespace

template <typename T>
std::vector<StepReport> fit(Trainer<T>& trainer, const Dataset<T>& data, const FitOptions& opt) {
  const TrainConfig& cfg = trainer.config();
  cfg.validate();
  if (data.x.empty() || data.y.empty())
    throw ConfigError(std::string("training domain ") + (data.x.empty() ? "X (corrupted)" : "Y (clean)") +
                      " is empty");
  const int64_t total = total_steps(cfg, data.x.size(), data.y.size());

  std::ofstream log;
  if (!opt.log_path.empty()) {
    const std::string head =
        trainer.step() > 0 && fs::exists(opt.log_path) ? truncated_log(opt.log_path, trainer.step())
                                                       : train_log_header() + "\n";
    log.open(opt.log_path, std::ios::trunc);
    if (!log) throw IoError("cannot open training log " + opt.log_path);
    log << head << std::flush;
  }
  auto save = [&](const std::string& name) {
    const Checkpoint ck = trainer.checkpoint();
    ck.save((fs::path(opt.checkpoint_dir) / name).string());
  };
  if (!opt.checkpoint_dir.empty()) {
    std::error_code ec;
    fs::create_directories(opt.checkpoint_dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + opt.checkpoint_dir);
  }

  std::vector<StepReport> reports;
  while (trainer.step() < total) {
    auto [bx, by] = batch_for_step(data, cfg, trainer.step());
    const StepReport r = trainer.train_step(bx, by);
    reports.push_back(r);
    if (log.is_open()) {
      log << train_log_row(r) << '\n' << std::flush;
      if (!log) throw IoError("failed writing training log " + opt.log_path);
    }
    if (opt.on_step) opt.on_step(r);
    if (!opt.checkpoint_dir.empty() && cfg.checkpoint_every > 0 && r.step % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%06lld.ckpt", static_cast<long long>(r.step));
      save(name);
      save("last.ckpt");
    }
  }
  if (!opt.checkpoint_dir.empty()) save("last.ckpt");
  return reports;
}

GeneratorConfig generator_config(const Checkpoint& ck) {
  if (!ck.has_meta("generator")) throw IoError("checkpoint does not record a generator architecture");
  std::istringstream is(ck.meta("generator"));
  GeneratorConfig cfg;
  int attention = 0;
  if (!(is >> cfg.base_channels >> cfg.residual_blocks >> attention))
    throw IoError("malformed generator architecture '" + ck.meta("generator") + "'");
  cfg.attention = attention != 0;
  return cfg;
}

template <typename T>
Generator<T> load_g1(const Checkpoint& ck) {
  Generator<T> g("g1", generator_config(ck));
  load_parameters(ck, g.parameters());
  return g;
}

template <typename T>
CorrectionResult correct_images(Generator<T>& g1, const std::string& input_dir, const std::string& output_dir) {
  if (!fs::is_directory(input_dir)) throw IoError("not a directory: " + input_dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(input_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw IoError("cannot create " + output_dir);

  CorrectionResult result;
  for (const auto& name : names) {
    Image img;
    try {
      img = read_png((fs::path(input_dir) / name).string());
    } catch (const IoError& e) {
      result.skipped.push_back(name + ": " + e.what());
      continue;
    }
    if (img.height % 4 != 0 || img.width % 4 != 0) {
      result.skipped.push_back(name + ": size " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                               " is not a multiple of 4");
      continue;
    }
    Graph<T> g;
    const Var<T> out = g1.forward(g, g.constant(to_tensor<T>(img)), ForwardOptions{false, false, 1});
    write_png((fs::path(output_dir) / name).string(), from_tensor(out.value()));
    result.written.push_back(name);
  }
  return result;
}

#define CMGAN_INSTANTIATE_TRAINER(T)                                                                         \
  template struct CycleModel<T>;                                                                             \
  template class ReplayBuffer<T>;                                                                            \
  template class Trainer<T>;                                                                                 \
  template GeneratorObjective<T> generator_objective(Graph<T>&, CycleModel<T>&, const Var<T>&, const Var<T>&, \
                                                     const TrainConfig&, Var<T>*, Var<T>*);                  \
  template std::pair<Tensor<T>, Tensor<T>> batch_for_step(const Dataset<T>&, const TrainConfig&, int64_t);   \
  template std::vector<StepReport> fit(Trainer<T>&, const Dataset<T>&, const FitOptions&);               \
  template Generator<T> load_g1(const Checkpoint&);                                                          \
  template CorrectionResult correct_images(Generator<T>&, const std::string&, const std::string&);

CMGAN_INSTANTIATE_TRAINER(float)
CMGAN_INSTANTIATE_TRAINER(double)

}  // namespace cmgan
