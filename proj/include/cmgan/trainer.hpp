// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cmgan/checkpoint.hpp"
#include "cmgan/losses.hpp"
#include "cmgan/nn.hpp"
#include "cmgan/optim.hpp"
#include "cmgan/rng.hpp"

namespace cmgan {

// Domain X is the corrupted domain, Y the clean one. G1 maps X -> Y and is
// judged by D1; G2 maps Y -> X and is judged by D2.
struct TrainConfig {
  LossWeights weights;
  MsSsimParams msssim;
  AdamConfig adam;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  FeatureExtractorConfig features;
  int batch_size = 1;
  int epochs = 100;
  // Caps the run; 0 runs every step of every epoch.
  int64_t max_steps = 2000;
  uint64_t seed = 42;
  int replay_capacity = 50;
  int spectral_iterations = 1;
  int64_t image_size = 64;
  double init_stddev = 0.02;
  // Periodic checkpoint interval in steps (0: final checkpoint only).
  int64_t checkpoint_every = 0;

  // Throws ConfigError.
  void validate() const;
};

template <typename T>
struct CycleModel {
  Generator<T> g1, g2;
  PatchDiscriminator<T> d1, d2;
  FeatureExtractor<T> fe;

  // Networks initialised from cfg.seed. The autoencoder feature mode needs
  // `clean` images for pretraining.
  explicit CycleModel(const TrainConfig& cfg, const std::vector<Tensor<T>>* clean = nullptr);
};

struct Provenance {
  int64_t step = -1;
  int64_t index = -1;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// Pool of past generator outputs for discriminator updates. Below capacity
// each incoming image is stored and a previously stored one is returned (the
// incoming image only passes through while the pool was empty); at capacity
// each image is, with probability 1/2, swapped for a random stored one.
template <typename T>
class ReplayBuffer {
 public:
  struct Entry {
    Tensor<T> image;  // (1, c, h, w)
    Provenance tag;
  };

  explicit ReplayBuffer(int capacity = 50, uint64_t seed = 0) : capacity_(capacity), rng_(seed) {}

  // `batch` is (n, c, h, w) produced at `step`. Returns a batch of the same
  // shape; `tags`, when given, receives the provenance of each returned image.
  Tensor<T> query(const Tensor<T>& batch, int64_t step, std::vector<Provenance>* tags = nullptr);

  int capacity() const { return capacity_; }
  size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  void save(Checkpoint& ck, const std::string& prefix) const;
  void load(const Checkpoint& ck, const std::string& prefix);

 private:
  int capacity_;
  Rng rng_;
  std::vector<Entry> entries_;
};

struct StepReport {
  int64_t step = 0;
  double loss_d1 = 0;
  double loss_d2 = 0;
  // Sum of both generator adversarial terms.
  double loss_g_adv = 0;
  // Unweighted cycle components; skipped ones are 0.
  double l_cyc = 0;
  double l_msssim = 0;
  double l_cpercep = 0;
  double l_cstyle = 0;
  // Weighted total cycle objective.
  double total = 0;
  double grad_norm_g = 0;
  double grad_norm_d1 = 0;
  double grad_norm_d2 = 0;

  friend bool operator==(const StepReport&, const StepReport&) = default;
};

// Generator objective: both adversarial terms plus the weighted cycle loss.
template <typename T>
struct GeneratorObjective {
  Var<T> adv;
  CycleLoss<T> cycle;
  Var<T> total;
};

// Builds the generator objective for batches x and y in `g`. Generator
// parameters are bound for gradients; discriminators enter as constants.
template <typename T>
GeneratorObjective<T> generator_objective(Graph<T>& g, CycleModel<T>& model, const Var<T>& x, const Var<T>& y,
                                          const TrainConfig& cfg, Var<T>* fake_x = nullptr,
                                          Var<T>* fake_y = nullptr);

// Model, optimizer state, replay buffers and step counter.
template <typename T>
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg, const std::vector<Tensor<T>>* clean = nullptr);

  // One update: D1 and D2 on real batches against replay-buffer fakes, then
  // G1 and G2 jointly. A non-finite loss raises NumericalError naming it.
  StepReport train_step(const Tensor<T>& batch_x, const Tensor<T>& batch_y);

  enum class Phase { kDiscriminators, kGenerators };
  // Called after each update phase within train_step.
  void set_phase_hook(std::function<void(Phase)> hook) { hook_ = std::move(hook); }

  CycleModel<T>& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }
  int64_t step() const { return step_; }
  const ReplayBuffer<T>& buffer_x() const { return buffer_x_; }
  const ReplayBuffer<T>& buffer_y() const { return buffer_y_; }

  std::vector<Parameter<T>*> generator_parameters();
  std::vector<Parameter<T>*> discriminator_parameters();

  Checkpoint checkpoint() const;
  // Throws IoError when the checkpoint does not fit the configured model.
  void restore(const Checkpoint& ck);

 private:
  TrainConfig cfg_;
  CycleModel<T> model_;
  AdamState adam_g1_, adam_g2_, adam_d1_, adam_d2_;
  ReplayBuffer<T> buffer_x_, buffer_y_;
  int64_t step_ = 0;
  std::function<void(Phase)> hook_;
};

template <typename T>
struct Dataset {
  std::vector<Tensor<T>> x;  // (1, 1, h, w) in [-1, 1]
  std::vector<Tensor<T>> y;
};

struct FitOptions {
  // Per-step CSV log; appended to when resuming past step 0.
  std::string log_path;
  // Directory for ckpt_NNNNNN.ckpt and last.ckpt.
  std::string checkpoint_dir;
  std::function<void(const StepReport&)> on_step;
};

// Steps per epoch: the larger domain divided by the batch size, rounded up.
int64_t steps_per_epoch(size_t nx, size_t ny, int batch_size);
int64_t total_steps(const TrainConfig& cfg, size_t nx, size_t ny);

// Batch for `step`: each domain is shuffled independently per epoch from the
// run seed, so batches depend only on (seed, step).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> batch_for_step(const Dataset<T>& data, const TrainConfig& cfg, int64_t step);

// Runs from trainer.step() to total_steps. Throws ConfigError on an empty domain.
template <typename T>
std::vector<StepReport> fit(Trainer<T>& trainer, const Dataset<T>& data, const FitOptions& opt = {});

struct CorrectionResult {
  std::vector<std::string> written;
  // "name: reason" for every input that could not be processed.
  std::vector<std::string> skipped;
};

// Architecture recorded in a training checkpoint.
GeneratorConfig generator_config(const Checkpoint& ck);

// G1 with weights from a training checkpoint.
template <typename T>
Generator<T> load_g1(const Checkpoint& ck);

// Passes every *.png of `input_dir` through g1 and writes the result under the
// same name in `output_dir`.
template <typename T>
CorrectionResult correct_images(Generator<T>& g1, const std::string& input_dir, const std::string& output_dir);

// `step,loss_d1,loss_d2,loss_g_adv,l_cyc,l_msssim,l_cpercep,l_cstyle,total`.
std::string train_log_header();
std::string train_log_row(const StepReport& r);

}  // namespace cmgan
