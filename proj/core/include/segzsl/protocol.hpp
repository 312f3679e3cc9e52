// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segzsl/classify.hpp"
#include "segzsl/data.hpp"
#include "segzsl/trainer.hpp"

namespace segzsl {

// GZSL data split: seen-class rows partitioned into train/test, unseen rows
// all test.
struct SplitSpec {
  std::vector<int> seen;
  std::vector<int> unseen;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> seen_test_idx;
  std::vector<std::size_t> unseen_idx;
};

// Stratified split: per seen class, ceil(fraction * n_c) training rows. Every
// seen class needs >= 2 examples. Deterministic per seed (per-class shuffle
// streams), so the split does not depend on which classes exist elsewhere.
SplitSpec make_gzsl_split(const DatasetContainer& ds, double fraction,
                          std::uint64_t seed);

struct PerClassAccuracy {
  double mean = 0.0;
  std::map<int, double> per_class;
};

// Mean over classes of within-class accuracy. Classes in class_set that do
// not occur in y_true are excluded from the mean; every y_true label must be
// in class_set.
PerClassAccuracy per_class_accuracy(std::span<const int> y_true,
                                    std::span<const int> y_pred,
                                    std::span<const int> class_set);

// 2ab/(a+b) on [0,1] inputs; 0 when both are 0.
double harmonic_mean(double acc_tr, double acc_ts);

// Experiment-level configuration. `seed` is the master seed: the runners
// derive the training, split, synthesis and classifier streams from it, so a
// single value pins the whole run (train.seed / classifier.seed are
// overwritten with it).
struct ExperimentConfig {
  TrainConfig train;
  ClassifierConfig classifier;
  std::size_t exemplars_per_class = 100;
  SynthesisMode synth_mode = SynthesisMode::sample;
  bool augment_seen = false;  // also add synthesized seen-class exemplars
  double split_fraction = 0.8;
  double unseen_class_weight = 0.2;  // GZSL classifier weight for unseen rows
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

struct MetricsReport {
  std::string mode;  // "zsl" | "gzsl"
  std::optional<double> acc_seen;
  std::optional<double> acc_unseen;
  std::optional<double> harmonic;
  std::optional<double> acc_zsl;
  std::map<int, double> per_class;
  ExperimentConfig config;
  std::uint64_t seed = 0;
};

AttributeBank make_bank(const DatasetContainer& ds);

// Conventional ZSL: train on all seen rows, synthesize the unseen classes,
// classify the unseen test rows over the unseen label space.
MetricsReport run_zsl(const DatasetContainer& ds, const ExperimentConfig& cfg);

// Generalized ZSL: 80-20 stratified split of seen rows, classifier trained on
// real seen-train rows plus synthesized unseen exemplars (optionally plus
// synthesized seen), evaluated over the joint label space.
MetricsReport run_gzsl(const DatasetContainer& ds,
                       const ExperimentConfig& cfg);

// Matched-seed pair: the ablated run zeroes the feedback weights
// (lambda_c = lambda_e = lambda_r = 0), leaving a conditional VAE with a
// supervised-only regressor.
struct AblationResult {
  MetricsReport full;
  MetricsReport ablated;
};

AblationResult run_ablation_no_feedback(const DatasetContainer& ds,
                                        const ExperimentConfig& cfg);

// ZSL accuracy per classifier kind as the exemplar count varies; one shared
// generative model, same synthesis streams for every count (so smaller counts
// are prefixes of larger ones).
struct SweepResult {
  std::vector<std::size_t> counts;
  std::map<std::string, std::vector<double>> accuracy;  // kind -> per count
  ExperimentConfig config;
  std::uint64_t seed = 0;
};

SweepResult exemplar_sweep(const DatasetContainer& ds,
                           const ExperimentConfig& cfg,
                           std::span<const std::size_t> counts);

}  // namespace segzsl
