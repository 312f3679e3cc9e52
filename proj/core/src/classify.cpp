// SPDX-License-Identifier: Apache-2.0
#include "segzsl/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "segzsl/adam.hpp"
#include "segzsl/checkpoint.hpp"
#include "segzsl/error.hpp"
#include "segzsl/rng.hpp"

namespace segzsl {

namespace {

double weight_of(const ClassifierConfig& cfg, int label) {
  auto it = cfg.class_weights.find(label);
  return it == cfg.class_weights.end() ? 1.0 : it->second;
}

void check_train(const ExemplarSet& train, const ClassifierConfig& cfg) {
  if (train.size() == 0) {
    fail(Errc::invalid_argument, "classifier fit: empty training set");
  }
  if (train.features.rank() != 2 || train.features.rows() != train.size()) {
    fail(Errc::dim_mismatch,
         "classifier fit: features " + shape_str(train.features) + " for " +
             std::to_string(train.size()) + " labels");
  }
  if (!train.features.all_finite()) {
    fail(Errc::numeric_failure, "classifier fit: non-finite features");
  }
  if (!(cfg.svm_c > 0.0)) {
    fail(Errc::invalid_argument, "classifier fit: svm C must be > 0");
  }
  for (const auto& [cls, w] : cfg.class_weights) {
    if (!(w > 0.0)) {
      fail(Errc::invalid_argument,
           "classifier fit: class weight for class " + std::to_string(cls) +
               " must be > 0");
    }
  }
}

// Row order canonicalization: sort by label, then lexicographically by
// feature values. Makes fit() a pure function of the training-set contents.
std::vector<std::size_t> canonical_order(const ExemplarSet& train) {
  const std::size_t d = train.features.cols();
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (train.labels[a] != train.labels[b]) {
                       return train.labels[a] < train.labels[b];
                     }
                     const double* ra = train.features.data().data() + a * d;
                     const double* rb = train.features.data().data() + b * d;
                     return std::lexicographical_compare(ra, ra + d, rb,
                                                         rb + d);
                   });
  return order;
}

std::vector<int> resolve_classes(const ExemplarSet& train,
                                 std::span<const int> declared) {
  std::set<int> present(train.labels.begin(), train.labels.end());
  if (declared.empty()) {
    return {present.begin(), present.end()};
  }
  std::vector<int> classes(declared.begin(), declared.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::string missing;
  for (int c : classes) {
    if (!present.count(c)) {
      if (!missing.empty()) missing += ", ";
      missing += std::to_string(c);
    }
  }
  if (!missing.empty()) {
    fail(Errc::invalid_argument,
         "classifier fit: declared classes with zero training examples: " +
             missing);
  }
  std::set<int> declared_set(classes.begin(), classes.end());
  for (int y : train.labels) {
    if (!declared_set.count(y)) {
      fail(Errc::invalid_argument,
           "classifier fit: training label " + std::to_string(y) +
               " is not in the declared class set");
    }
  }
  return classes;
}

LinearModel fit_svm(const ExemplarSet& train, const ClassifierConfig& cfg,
                    std::vector<int> classes) {
  const std::size_t m = train.size();
  const std::size_t d = train.features.cols();
  const std::size_t c = classes.size();
  std::unordered_map<int, std::size_t> class_index;
  for (std::size_t k = 0; k < c; ++k) class_index[classes[k]] = k;

  const double lambda = 1.0 / (cfg.svm_c * static_cast<double>(m));
  const std::vector<std::size_t> canon = canonical_order(train);

  Tensor w({c, d});
  Tensor b({c});
  // Averaged iterates, updated incrementally.
  Tensor w_avg({c, d});
  Tensor b_avg({c});

  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle(derive_seed(cfg.seed, StreamId::classifier, epoch));
    const std::vector<std::size_t> perm = shuffle.permutation(m);
    for (std::size_t s = 0; s < m; ++s) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const std::size_t i = canon[perm[s]];
      const double* xi = train.features.data().data() + i * d;
      const double wi = weight_of(cfg, train.labels[i]);
      const std::size_t yi = class_index.at(train.labels[i]);
      const double decay = 1.0 - eta * lambda;
      for (std::size_t k = 0; k < c; ++k) {
        double* wk = w.data().data() + k * d;
        double score = b[k];
        for (std::size_t j = 0; j < d; ++j) score += wk[j] * xi[j];
        const double y = (k == yi) ? 1.0 : -1.0;
        const bool active = y * score < 1.0;
        const double push = active ? eta * wi * y : 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          wk[j] = decay * wk[j] + push * xi[j];
        }
        if (active) b[k] += push;
      }
      const double blend = 1.0 / static_cast<double>(t);
      for (std::size_t j = 0; j < w.numel(); ++j) {
        w_avg[j] += (w[j] - w_avg[j]) * blend;
      }
      for (std::size_t k = 0; k < c; ++k) {
        b_avg[k] += (b[k] - b_avg[k]) * blend;
      }
    }
  }

  LinearModel model;
  model.w = std::move(w_avg);
  model.b = std::move(b_avg);
  model.classes = std::move(classes);
  return model;
}

LinearModel fit_softmax(const ExemplarSet& train, const ClassifierConfig& cfg,
                        std::vector<int> classes) {
  const std::size_t m = train.size();
  const std::size_t d = train.features.cols();
  const std::size_t c = classes.size();
  std::unordered_map<int, std::size_t> class_index;
  for (std::size_t k = 0; k < c; ++k) class_index[classes[k]] = k;

  const std::vector<std::size_t> canon = canonical_order(train);
  Tensor x({m, d});
  std::vector<std::size_t> y(m);
  std::vector<double> wts(m);
  double weight_total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t src = canon[i];
    const double* row = train.features.data().data() + src * d;
    std::copy(row, row + d, x.data().data() + i * d);
    y[i] = class_index.at(train.labels[src]);
    wts[i] = weight_of(cfg, train.labels[src]);
    weight_total += wts[i];
  }

  Tensor w({c, d});
  Tensor b({c});
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.softmax_lr;
  std::vector<const Tensor*> param_view{&w, &b};
  AdamState adam("softmax", adam_cfg, param_view);

  Tensor scores({m, c});
  for (std::size_t step = 0; step < cfg.epochs; ++step) {
    // scores = x * w^T + b
    gemm_nt(scores.data(), x.data(), w.data(), m, d, c, false);
    for (std::size_t i = 0; i < m; ++i) {
      double* row = scores.data().data() + i * c;
      for (std::size_t k = 0; k < c; ++k) row[k] += b[k];
      double mx = row[0];
      for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, row[k]);
      double z = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        row[k] = std::exp(row[k] - mx);
        z += row[k];
      }
      const double scale = wts[i] / (z * weight_total);
      for (std::size_t k = 0; k < c; ++k) row[k] *= scale;
      row[y[i]] -= wts[i] / weight_total;
    }
    Tensor gw({c, d});
    // gw = scores^T * x
    gemm_tn(gw.data(), scores.data(), x.data(), c, m, d, false);
    for (std::size_t j = 0; j < gw.numel(); ++j) {
      gw[j] += 2.0 * cfg.softmax_l2 * w[j];
    }
    Tensor gb({c});
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = scores.data().data() + i * c;
      for (std::size_t k = 0; k < c; ++k) gb[k] += row[k];
    }
    std::vector<Tensor*> target{&w, &b};
    std::vector<Tensor> grads;
    grads.push_back(std::move(gw));
    grads.push_back(std::move(gb));
    adam.step(target, grads);
  }

  LinearModel model;
  model.w = std::move(w);
  model.b = std::move(b);
  model.classes = std::move(classes);
  return model;
}

}  // namespace

Classifier Classifier::fit(const ExemplarSet& train,
                           const ClassifierConfig& cfg,
                           std::span<const int> declared_classes) {
  check_train(train, cfg);
  std::vector<int> classes = resolve_classes(train, declared_classes);

  Classifier clf;
  clf.kind_ = cfg.kind;
  switch (cfg.kind) {
    case ClassifierKind::svm:
      clf.linear_ = fit_svm(train, cfg, std::move(classes));
      break;
    case ClassifierKind::softmax:
      clf.linear_ = fit_softmax(train, cfg, std::move(classes));
      break;
    case ClassifierKind::knn: {
      const std::vector<std::size_t> canon = canonical_order(train);
      const std::size_t d = train.features.cols();
      clf.knn_.x = Tensor({train.size(), d});
      clf.knn_.labels.resize(train.size());
      for (std::size_t i = 0; i < canon.size(); ++i) {
        const double* row = train.features.data().data() + canon[i] * d;
        std::copy(row, row + d, clf.knn_.x.data().data() + i * d);
        clf.knn_.labels[i] = train.labels[canon[i]];
      }
      clf.knn_.classes = std::move(classes);
      break;
    }
  }
  return clf;
}

const std::vector<int>& Classifier::classes() const {
  return kind_ == ClassifierKind::knn ? knn_.classes : linear_.classes;
}

const LinearModel& Classifier::linear() const {
  if (kind_ == ClassifierKind::knn) {
    fail(Errc::invalid_argument, "classifier: knn model has no linear form");
  }
  return linear_;
}

const KnnModel& Classifier::knn() const {
  if (kind_ != ClassifierKind::knn) {
    fail(Errc::invalid_argument, "classifier: not a knn model");
  }
  return knn_;
}

std::vector<int> Classifier::predict(const Tensor& x,
                                     std::size_t threads) const {
  const std::size_t d =
      kind_ == ClassifierKind::knn ? knn_.x.cols() : linear_.w.cols();
  if (x.rank() != 2 || x.cols() != d) {
    fail(Errc::dim_mismatch, "predict: input " + shape_str(x) +
                                 " does not match feature dim " +
                                 std::to_string(d));
  }
  if (!x.all_finite()) {
    fail(Errc::numeric_failure, "predict: non-finite input");
  }
  const std::size_t n = x.rows();
  std::vector<int> out(n);

  auto predict_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double* row = x.data().data() + i * d;
      if (kind_ == ClassifierKind::knn) {
        std::size_t best_idx = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < knn_.x.rows(); ++r) {
          const double* stored = knn_.x.data().data() + r * d;
          double dist = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dev = row[j] - stored[j];
            dist += dev * dev;
          }
          if (dist < best_dist) {
            best_dist = dist;
            best_idx = r;
          }
        }
        out[i] = knn_.labels[best_idx];
      } else {
        // Ties break toward the lowest class id; classes are ascending.
        std::size_t best_k = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < linear_.classes.size(); ++k) {
          const double* wk = linear_.w.data().data() + k * d;
          double score = linear_.b[k];
          for (std::size_t j = 0; j < d; ++j) score += wk[j] * row[j];
          if (score > best_score) {
            best_score = score;
            best_k = k;
          }
        }
        out[i] = linear_.classes[best_k];
      }
    }
  };

  if (threads <= 1 || n < 2) {
    predict_range(0, n);
  } else {
    const std::size_t workers = std::min(threads, n);
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(begin + chunk, n);
      if (begin >= end) break;
      pool.emplace_back(predict_range, begin, end);
    }
    for (std::thread& t : pool) t.join();
  }
  return out;
}

double svm_objective(const LinearModel& model, const ExemplarSet& train,
                     const ClassifierConfig& cfg) {
  const std::size_t m = train.size();
  const std::size_t d = train.features.cols();
  const double lambda = 1.0 / (cfg.svm_c * static_cast<double>(m));
  double obj = 0.0;
  for (std::size_t k = 0; k < model.classes.size(); ++k) {
    const double* wk = model.w.data().data() + k * d;
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm += wk[j] * wk[j];
    obj += 0.5 * lambda * norm;
    double hinge_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double* xi = train.features.data().data() + i * d;
      double score = model.b[k];
      for (std::size_t j = 0; j < d; ++j) score += wk[j] * xi[j];
      const double y = train.labels[i] == model.classes[k] ? 1.0 : -1.0;
      const double hinge = std::max(0.0, 1.0 - y * score);
      hinge_sum += weight_of(cfg, train.labels[i]) * hinge;
    }
    obj += hinge_sum / static_cast<double>(m);
  }
  return obj;
}

namespace {
const char* kind_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::svm:
      return "svm";
    case ClassifierKind::softmax:
      return "softmax";
    case ClassifierKind::knn:
      return "knn";
  }
  return "svm";
}
}  // namespace

void Classifier::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json header;
  header["kind"] = "classifier";
  header["classifier"] = kind_name(kind_);
  if (kind_ == ClassifierKind::knn) {
    header["classes"] = knn_.classes;
    header["rows"] = knn_.x.rows();
    header["feature_dim"] = knn_.x.cols();
    header["labels"] = knn_.labels;
    FramedWriter writer(path, header.dump());
    writer.write_tensor(knn_.x);
    writer.finish();
  } else {
    header["classes"] = linear_.classes;
    header["feature_dim"] = linear_.w.cols();
    FramedWriter writer(path, header.dump());
    writer.write_tensor(linear_.w);
    writer.write_tensor(linear_.b);
    writer.finish();
  }
}

Classifier Classifier::load(const std::filesystem::path& path) {
  FramedReader reader(path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(reader.header_json());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_version,
         path.string() + ": bad classifier header: " + e.what());
  }
  if (header.value("kind", "") != "classifier") {
    fail(Errc::format_version,
         path.string() + ": checkpoint does not hold a classifier");
  }
  Classifier clf;
  const std::string name = header.value("classifier", "");
  try {
    if (name == "knn") {
      clf.kind_ = ClassifierKind::knn;
      clf.knn_.classes = header.at("classes").get<std::vector<int>>();
      clf.knn_.labels = header.at("labels").get<std::vector<int>>();
      const auto rows = header.at("rows").get<std::size_t>();
      const auto d = header.at("feature_dim").get<std::size_t>();
      if (clf.knn_.labels.size() != rows) {
        fail(Errc::dim_mismatch,
             path.string() + ": knn labels do not match declared rows");
      }
      clf.knn_.x = reader.read_tensor({rows, d});
    } else if (name == "svm" || name == "softmax") {
      clf.kind_ =
          name == "svm" ? ClassifierKind::svm : ClassifierKind::softmax;
      clf.linear_.classes = header.at("classes").get<std::vector<int>>();
      const auto d = header.at("feature_dim").get<std::size_t>();
      clf.linear_.w = reader.read_tensor({clf.linear_.classes.size(), d});
      clf.linear_.b = reader.read_tensor({clf.linear_.classes.size()});
    } else {
      fail(Errc::format_version,
           path.string() + ": unknown classifier kind '" + name + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_version,
         path.string() + ": bad classifier header field: " + e.what());
  }
  reader.expect_end();
  return clf;
}

}  // namespace segzsl
