// SPDX-License-Identifier: Apache-2.0
#include "segzsl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "segzsl/error.hpp"
#include "segzsl/rng.hpp"
#include "segzsl/synthesis.hpp"

namespace segzsl {

SplitSpec make_gzsl_split(const DatasetContainer& ds, double fraction,
                          std::uint64_t seed) {
  ds.validate();
  if (!(fraction > 0.0 && fraction < 1.0)) {
    fail(Errc::invalid_argument,
         "make_gzsl_split: fraction must be in (0, 1)");
  }
  SplitSpec split;
  split.seen = ds.seen_classes;
  split.unseen = ds.unseen_classes;

  std::map<int, std::vector<std::size_t>> rows_by_class;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    rows_by_class[ds.labels[i]].push_back(i);
  }

  for (int cls : ds.seen_classes) {
    auto it = rows_by_class.find(cls);
    const std::size_t n_c = it == rows_by_class.end() ? 0 : it->second.size();
    if (n_c < 2) {
      fail(Errc::invalid_argument,
           "make_gzsl_split: seen class " + std::to_string(cls) + " has " +
               std::to_string(n_c) + " examples, need >= 2");
    }
    RngStream rng(derive_seed(seed, StreamId::split,
                              static_cast<std::uint64_t>(cls)));
    const std::vector<std::size_t> perm = rng.permutation(n_c);
    const auto n_train = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(n_c)));
    const std::vector<std::size_t>& rows = it->second;
    for (std::size_t i = 0; i < n_c; ++i) {
      if (i < n_train) {
        split.train_idx.push_back(rows[perm[i]]);
      } else {
        split.seen_test_idx.push_back(rows[perm[i]]);
      }
    }
  }
  for (int cls : ds.unseen_classes) {
    auto it = rows_by_class.find(cls);
    if (it == rows_by_class.end()) continue;
    split.unseen_idx.insert(split.unseen_idx.end(), it->second.begin(),
                            it->second.end());
  }
  std::sort(split.train_idx.begin(), split.train_idx.end());
  std::sort(split.seen_test_idx.begin(), split.seen_test_idx.end());
  std::sort(split.unseen_idx.begin(), split.unseen_idx.end());
  return split;
}

PerClassAccuracy per_class_accuracy(std::span<const int> y_true,
                                    std::span<const int> y_pred,
                                    std::span<const int> class_set) {
  if (y_true.size() != y_pred.size()) {
    fail(Errc::invalid_argument,
         "per_class_accuracy: " + std::to_string(y_true.size()) +
             " true labels vs " + std::to_string(y_pred.size()) +
             " predictions");
  }
  std::unordered_set<int> allowed(class_set.begin(), class_set.end());
  std::map<int, std::pair<std::size_t, std::size_t>> counts;  // correct, total
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (!allowed.count(y_true[i])) {
      fail(Errc::invalid_argument,
           "per_class_accuracy: true label " + std::to_string(y_true[i]) +
               " is not in the class set");
    }
    auto& [correct, total] = counts[y_true[i]];
    ++total;
    if (y_true[i] == y_pred[i]) ++correct;
  }
  PerClassAccuracy out;
  if (counts.empty()) {
    fail(Errc::invalid_argument, "per_class_accuracy: no labels given");
  }
  for (const auto& [cls, ct] : counts) {
    const double acc =
        static_cast<double>(ct.first) / static_cast<double>(ct.second);
    out.per_class[cls] = acc;
    out.mean += acc;
  }
  out.mean /= static_cast<double>(counts.size());
  return out;
}

double harmonic_mean(double acc_tr, double acc_ts) {
  if (!(acc_tr >= 0.0 && acc_tr <= 1.0) ||
      !(acc_ts >= 0.0 && acc_ts <= 1.0)) {
    fail(Errc::invalid_argument, "harmonic_mean: inputs must lie in [0, 1]");
  }
  const double denom = acc_tr + acc_ts;
  if (denom == 0.0) return 0.0;
  return 2.0 * acc_tr * acc_ts / denom;
}

AttributeBank make_bank(const DatasetContainer& ds) {
  return AttributeBank(ds.attrs, ds.seen_classes, ds.unseen_classes);
}

namespace {

TrainingSet gather_training_set(const DatasetContainer& ds,
                                std::span<const std::size_t> rows) {
  const std::size_t d = ds.feature_dim();
  TrainingSet set;
  set.x = Tensor({rows.size(), d});
  set.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = ds.x.data().data() + rows[i] * d;
    std::copy(src, src + d, set.x.data().data() + i * d);
    set.labels[i] = ds.labels[rows[i]];
  }
  return set;
}

ExemplarSet real_exemplars(const DatasetContainer& ds,
                           std::span<const std::size_t> rows) {
  const std::size_t d = ds.feature_dim();
  ExemplarSet set;
  set.features = Tensor({rows.size(), d});
  set.labels.resize(rows.size());
  set.provenance.assign(rows.size(), Provenance::real);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = ds.x.data().data() + rows[i] * d;
    std::copy(src, src + d, set.features.data().data() + i * d);
    set.labels[i] = ds.labels[rows[i]];
  }
  return set;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t d = x.cols();
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = x.data().data() + rows[i] * d;
    std::copy(src, src + d, out.data().data() + i * d);
  }
  return out;
}

std::vector<int> gather_labels(const DatasetContainer& ds,
                               std::span<const std::size_t> rows) {
  std::vector<int> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = ds.labels[rows[i]];
  return out;
}

// Runners pin the sub-seeds to the experiment master seed.
ExperimentConfig resolve_seeds(const ExperimentConfig& cfg) {
  ExperimentConfig out = cfg;
  out.train.seed = cfg.seed;
  out.classifier.seed = cfg.seed;
  return out;
}

void check_experiment(const ExperimentConfig& cfg) {
  if (cfg.exemplars_per_class < 1) {
    fail(Errc::invalid_argument,
         "experiment: exemplars_per_class must be >= 1 (a classifier "
         "without synthesized unseen exemplars can never predict an unseen "
         "class)");
  }
  if (!(cfg.unseen_class_weight > 0.0)) {
    fail(Errc::invalid_argument,
         "experiment: unseen_class_weight must be > 0");
  }
}

}  // namespace

MetricsReport run_zsl(const DatasetContainer& ds,
                      const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = resolve_seeds(raw_cfg);
  check_experiment(cfg);
  ds.validate();
  if (ds.unseen_classes.empty()) {
    fail(Errc::invalid_argument, "run_zsl: dataset has no unseen classes");
  }
  const AttributeBank bank = make_bank(ds);

  const std::vector<std::size_t> seen_rows =
      ds.rows_of_classes(ds.seen_classes);
  if (seen_rows.empty()) {
    fail(Errc::invalid_argument, "run_zsl: dataset has no seen examples");
  }
  auto [ds_std, transform] = standardize_features(ds, seen_rows);

  TrainingSet train_set = gather_training_set(ds_std, seen_rows);
  auto [params, log] = train(train_set, bank, cfg.train);

  ExemplarSet synth =
      synthesize_all(params, bank, ds.unseen_classes, cfg.exemplars_per_class,
                     cfg.seed, cfg.synth_mode, cfg.threads);
  Classifier clf = Classifier::fit(synth, cfg.classifier, ds.unseen_classes);

  const std::vector<std::size_t> unseen_rows =
      ds.rows_of_classes(ds.unseen_classes);
  if (unseen_rows.empty()) {
    fail(Errc::invalid_argument, "run_zsl: dataset has no unseen examples");
  }
  const Tensor x_eval = gather_rows(ds_std.x, unseen_rows);
  const std::vector<int> y_true = gather_labels(ds, unseen_rows);
  const std::vector<int> y_pred = clf.predict(x_eval, cfg.threads);

  PerClassAccuracy acc =
      per_class_accuracy(y_true, y_pred, ds.unseen_classes);

  MetricsReport report;
  report.mode = "zsl";
  report.acc_zsl = acc.mean;
  report.per_class = std::move(acc.per_class);
  report.config = cfg;
  report.seed = cfg.seed;
  return report;
}

MetricsReport run_gzsl(const DatasetContainer& ds,
                       const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = resolve_seeds(raw_cfg);
  check_experiment(cfg);
  ds.validate();
  if (ds.unseen_classes.empty()) {
    fail(Errc::invalid_argument, "run_gzsl: dataset has no unseen classes");
  }
  const AttributeBank bank = make_bank(ds);
  const SplitSpec split = make_gzsl_split(ds, cfg.split_fraction, cfg.seed);
  auto [ds_std, transform] = standardize_features(ds, split.train_idx);

  TrainingSet train_set = gather_training_set(ds_std, split.train_idx);
  auto [params, log] = train(train_set, bank, cfg.train);

  ExemplarSet classifier_train = real_exemplars(ds_std, split.train_idx);
  ExemplarSet synth_unseen =
      synthesize_all(params, bank, ds.unseen_classes, cfg.exemplars_per_class,
                     cfg.seed, cfg.synth_mode, cfg.threads);
  classifier_train = concat(classifier_train, synth_unseen);
  if (cfg.augment_seen) {
    ExemplarSet synth_seen =
        synthesize_all(params, bank, ds.seen_classes, cfg.exemplars_per_class,
                       cfg.seed, cfg.synth_mode, cfg.threads);
    classifier_train = concat(classifier_train, synth_seen);
  }

  ClassifierConfig clf_cfg = cfg.classifier;
  for (int cls : ds.unseen_classes) {
    clf_cfg.class_weights.emplace(cls, cfg.unseen_class_weight);
  }
  std::vector<int> label_space = ds.seen_classes;
  label_space.insert(label_space.end(), ds.unseen_classes.begin(),
                     ds.unseen_classes.end());
  Classifier clf = Classifier::fit(classifier_train, clf_cfg, label_space);

  MetricsReport report;
  report.mode = "gzsl";
  report.config = cfg;
  report.seed = cfg.seed;

  if (!split.seen_test_idx.empty()) {
    const Tensor x_seen = gather_rows(ds_std.x, split.seen_test_idx);
    const std::vector<int> y_true = gather_labels(ds, split.seen_test_idx);
    const std::vector<int> y_pred = clf.predict(x_seen, cfg.threads);
    PerClassAccuracy acc = per_class_accuracy(y_true, y_pred, ds.seen_classes);
    report.acc_seen = acc.mean;
    report.per_class.insert(acc.per_class.begin(), acc.per_class.end());
  }
  if (!split.unseen_idx.empty()) {
    const Tensor x_unseen = gather_rows(ds_std.x, split.unseen_idx);
    const std::vector<int> y_true = gather_labels(ds, split.unseen_idx);
    const std::vector<int> y_pred = clf.predict(x_unseen, cfg.threads);
    PerClassAccuracy acc =
        per_class_accuracy(y_true, y_pred, ds.unseen_classes);
    report.acc_unseen = acc.mean;
    report.per_class.insert(acc.per_class.begin(), acc.per_class.end());
  }
  if (report.acc_seen && report.acc_unseen) {
    report.harmonic = harmonic_mean(*report.acc_seen, *report.acc_unseen);
  }
  return report;
}

AblationResult run_ablation_no_feedback(const DatasetContainer& ds,
                                        const ExperimentConfig& cfg) {
  AblationResult result;
  result.full = run_zsl(ds, cfg);

  ExperimentConfig ablated = cfg;
  ablated.train.weights.lambda_c = 0.0;
  ablated.train.weights.lambda_e = 0.0;
  ablated.train.weights.lambda_r = 0.0;
  result.ablated = run_zsl(ds, ablated);
  return result;
}

SweepResult exemplar_sweep(const DatasetContainer& ds,
                           const ExperimentConfig& raw_cfg,
                           std::span<const std::size_t> counts) {
  const ExperimentConfig cfg = resolve_seeds(raw_cfg);
  check_experiment(cfg);
  if (counts.empty()) {
    fail(Errc::invalid_argument, "exemplar_sweep: no counts given");
  }
  for (std::size_t n : counts) {
    if (n < 1) {
      fail(Errc::invalid_argument, "exemplar_sweep: counts must be >= 1");
    }
  }
  ds.validate();
  const AttributeBank bank = make_bank(ds);

  const std::vector<std::size_t> seen_rows =
      ds.rows_of_classes(ds.seen_classes);
  if (seen_rows.empty()) {
    fail(Errc::invalid_argument, "exemplar_sweep: dataset has no seen rows");
  }
  auto [ds_std, transform] = standardize_features(ds, seen_rows);
  TrainingSet train_set = gather_training_set(ds_std, seen_rows);
  auto [params, log] = train(train_set, bank, cfg.train);

  const std::vector<std::size_t> unseen_rows =
      ds.rows_of_classes(ds.unseen_classes);
  const Tensor x_eval = gather_rows(ds_std.x, unseen_rows);
  const std::vector<int> y_true = gather_labels(ds, unseen_rows);

  SweepResult result;
  result.counts.assign(counts.begin(), counts.end());
  result.config = cfg;
  result.seed = cfg.seed;
  const std::pair<std::string, ClassifierKind> kinds[] = {
      {"svm", ClassifierKind::svm},
      {"softmax", ClassifierKind::softmax},
      {"knn", ClassifierKind::knn},
  };
  for (const auto& [name, kind] : kinds) {
    result.accuracy[name] = {};
    result.accuracy[name].reserve(counts.size());
  }
  for (std::size_t n : counts) {
    ExemplarSet synth = synthesize_all(params, bank, ds.unseen_classes, n,
                                       cfg.seed, cfg.synth_mode, cfg.threads);
    for (const auto& [name, kind] : kinds) {
      ClassifierConfig clf_cfg = cfg.classifier;
      clf_cfg.kind = kind;
      Classifier clf = Classifier::fit(synth, clf_cfg, ds.unseen_classes);
      const std::vector<int> y_pred = clf.predict(x_eval, cfg.threads);
      result.accuracy[name].push_back(
          per_class_accuracy(y_true, y_pred, ds.unseen_classes).mean);
    }
  }
  return result;
}

}  // namespace segzsl
