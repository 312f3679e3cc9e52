// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "segzsl/synthesis.hpp"
#include "segzsl/tensor.hpp"

namespace segzsl {

enum class ClassifierKind : std::uint8_t { svm, softmax, knn };

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::svm;
  // SVM regularization constant C (hinge weight); the Pegasos lambda is
  // 1 / (C * M).
  double svm_c = 1.0;
  // Per-class loss multipliers; classes not listed weigh 1.0. Ignored by knn.
  std::map<int, double> class_weights;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  // Softmax settings.
  double softmax_lr = 0.1;
  double softmax_l2 = 1e-4;
};

// One-vs-rest scores: row per class in ascending class-id order.
struct LinearModel {
  Tensor w;  // C x D
  Tensor b;  // C
  std::vector<int> classes;
};

// Stored rows for 1-nearest-neighbor.
struct KnnModel {
  Tensor x;  // M x D
  std::vector<int> labels;
  std::vector<int> classes;
};

// Off-the-shelf final classifier. fit() canonicalizes the training-row order
// (sort by label, then lexicographically by features) so the fitted model is
// invariant to the order rows arrive in; all remaining randomness comes from
// cfg.seed.
class Classifier {
 public:
  // declared_classes may extend beyond the labels present; a declared class
  // with zero training rows is an error. Empty means "classes present in
  // train".
  static Classifier fit(const ExemplarSet& train, const ClassifierConfig& cfg,
                        std::span<const int> declared_classes = {});

  std::vector<int> predict(const Tensor& x, std::size_t threads = 1) const;

  ClassifierKind kind() const { return kind_; }
  const std::vector<int>& classes() const;
  const LinearModel& linear() const;
  const KnnModel& knn() const;

  void save(const std::filesystem::path& path) const;
  static Classifier load(const std::filesystem::path& path);

 private:
  ClassifierKind kind_ = ClassifierKind::svm;
  LinearModel linear_;
  KnnModel knn_;
};

// Regularized primal SVM objective of a one-vs-rest stack, used by the
// convergence checks: sum over classes of lambda/2 ||w_c||^2 +
// (1/M) sum_i weight_i * hinge(y_ic * (w_c x_i + b_c)).
double svm_objective(const LinearModel& model, const ExemplarSet& train,
                     const ClassifierConfig& cfg);

}  // namespace segzsl
