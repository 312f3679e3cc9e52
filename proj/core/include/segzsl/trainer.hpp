// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segzsl/adam.hpp"
#include "segzsl/networks.hpp"
#include "segzsl/objectives.hpp"

namespace segzsl {

struct TrainConfig {
  LossWeights weights{};
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t pretrain_epochs = 20;
  std::size_t joint_epochs = 80;
  std::size_t latent_dim = 64;
  std::size_t hidden = 512;
  std::uint64_t seed = 1;
  // 0 means "use batch_size" samples for the unsupervised terms.
  std::size_t unsup_samples = 0;
  LatentLossMode latent_mode = LatentLossMode::posterior;
  bool early_stop = false;
  std::size_t early_stop_patience = 10;
  double early_stop_rel_tol = 1e-4;

  std::size_t effective_unsup_samples() const {
    return unsup_samples == 0 ? batch_size : unsup_samples;
  }
};

// One record per completed epoch. Fields absent in a phase (the regressor
// and combined-generator losses during pretraining) stay unset.
struct EpochRecord {
  std::string phase;  // "pretrain" | "joint"
  std::size_t epoch = 0;
  double loss_vae = 0.0;
  std::optional<double> loss_regressor;
  std::optional<double> loss_generator;
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  // Line-delimited JSON, one object per epoch with key order
  // phase, epoch, loss_vae, loss_regressor, loss_generator, wall_ms.
  void save(const std::filesystem::path& path) const;
};

// Labeled training rows (seen classes only).
struct TrainingSet {
  Tensor x;                 // N x D
  std::vector<int> labels;  // N
};

// Optimization schedule: VAE pretraining on the encoder-generator pair,
// then per minibatch one regressor update (Eq-3 style objective) followed by
// one encoder-generator update (combined generator objective).
//
// RNG scheme: stream shuffle/counter global-epoch orders each epoch's
// minibatches; stream sampler/counter global-step seeds each step's draws.
// Global counters advance across both phases, so a run is reproducible from
// (seed, config) alone.
class Trainer {
 public:
  // Initializes fresh parameters from derive_seed(cfg.seed, train, 0).
  Trainer(Dims dims, const TrainConfig& cfg);
  // Resumes from existing parameters.
  Trainer(ModelParams params, const TrainConfig& cfg);

  const ModelParams& params() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  const TrainLog& log() const { return log_; }

  // Runs cfg.pretrain_epochs epochs of VAE-only updates. The regressor is
  // untouched.
  void pretrain(const TrainingSet& data, const AttributeBank& bank);

  // Runs cfg.joint_epochs epochs of alternating updates.
  void joint_train(const TrainingSet& data, const AttributeBank& bank);

  // Single updates on an explicit batch (steps consume the global sampler
  // counter like the epoch loops do).
  RegressorLossEval regressor_step(const Batch& batch,
                                   const AttributeBank& bank);
  GeneratorLossEval generator_step(const Batch& batch,
                                   const AttributeBank& bank);
  double vae_step(const Batch& batch);

 private:
  Batch gather_batch(const TrainingSet& data, const AttributeBank& bank,
                     std::span<const std::size_t> rows) const;
  void check_finite(const char* phase, std::size_t epoch, std::size_t batch);

  ModelParams params_;
  TrainConfig cfg_;
  AdamState adam_regressor_;
  AdamState adam_encoder_generator_;
  TrainLog log_;
  std::uint64_t global_epoch_ = 0;
  std::uint64_t global_step_ = 0;
};

// Full schedule on seen-class data; returns final parameters and the log.
std::pair<ModelParams, TrainLog> train(const TrainingSet& data_seen,
                                       const AttributeBank& bank,
                                       const TrainConfig& cfg);

}  // namespace segzsl
