// SPDX-License-Identifier: Apache-2.0
#include "segzsl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "segzsl/checkpoint.hpp"
#include "segzsl/error.hpp"
#include "segzsl/rng.hpp"

namespace segzsl {

namespace {

constexpr const char* kSchema = "segzsl-ds/1";

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void write_f32_file(const std::filesystem::path& path, const Tensor& t) {
  std::string buf(t.numel() * sizeof(float), '\0');
  auto* out = reinterpret_cast<float*>(buf.data());
  for (std::size_t i = 0; i < t.numel(); ++i) {
    out[i] = static_cast<float>(t[i]);
  }
  write_text_atomic(path, buf);
}

void write_i32_file(const std::filesystem::path& path,
                    std::span<const int> values) {
  std::string buf(values.size() * sizeof(std::int32_t), '\0');
  auto* out = reinterpret_cast<std::int32_t*>(buf.data());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<std::int32_t>(values[i]);
  }
  write_text_atomic(path, buf);
}

std::string read_sized_file(const std::filesystem::path& path,
                            std::size_t expect_bytes, const char* what) {
  std::string raw = read_text_file(path);
  if (raw.size() != expect_bytes) {
    fail(Errc::truncated_file,
         path.string() + ": " + std::string(what) + " holds " +
             std::to_string(raw.size()) + " bytes, manifest implies " +
             std::to_string(expect_bytes));
  }
  return raw;
}

Tensor read_f32_file(const std::filesystem::path& path, std::size_t rows,
                     std::size_t cols, const char* what) {
  std::string raw = read_sized_file(path, rows * cols * sizeof(float), what);
  Tensor t({rows, cols});
  const auto* in = reinterpret_cast<const float*>(raw.data());
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t[i] = static_cast<double>(in[i]);
  }
  return t;
}

std::vector<int> read_i32_file(const std::filesystem::path& path,
                               std::size_t count, const char* what) {
  std::string raw = read_sized_file(path, count * sizeof(std::int32_t), what);
  std::vector<int> values(count);
  const auto* in = reinterpret_cast<const std::int32_t*>(raw.data());
  for (std::size_t i = 0; i < count; ++i) values[i] = in[i];
  return values;
}

void check_class_list(std::span<const int> classes, std::size_t c_total,
                      const char* what) {
  std::unordered_set<int> uniq;
  for (int c : classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= c_total) {
      fail(Errc::invalid_argument, std::string(what) + " class " +
                                       std::to_string(c) +
                                       " has no attribute row");
    }
    if (!uniq.insert(c).second) {
      fail(Errc::invalid_argument,
           std::string(what) + " class " + std::to_string(c) + " repeated");
    }
  }
}

}  // namespace

void DatasetContainer::validate() const {
  if (x.rank() != 2) {
    fail(Errc::shape_mismatch, "container: features must be rank-2");
  }
  if (attrs.rank() != 2) {
    fail(Errc::shape_mismatch, "container: attributes must be rank-2");
  }
  if (labels.size() != x.rows()) {
    fail(Errc::dim_mismatch,
         "container: " + std::to_string(labels.size()) + " labels for " +
             std::to_string(x.rows()) + " feature rows");
  }
  const std::size_t c = num_classes();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      fail(Errc::invalid_argument,
           "container: label " + std::to_string(labels[i]) + " at row " +
               std::to_string(i) + " is outside [0, " + std::to_string(c) +
               ")");
    }
  }
  check_class_list(seen_classes, c, "container: seen");
  check_class_list(unseen_classes, c, "container: unseen");
  for (int u : unseen_classes) {
    if (std::find(seen_classes.begin(), seen_classes.end(), u) !=
        seen_classes.end()) {
      fail(Errc::invalid_argument, "container: class " + std::to_string(u) +
                                       " is both seen and unseen");
    }
  }
  for (const auto& [name, split] : splits) {
    for (std::size_t idx : split.train) {
      if (idx >= num_examples()) {
        fail(Errc::invalid_argument, "container: split '" + name +
                                         "' train index " +
                                         std::to_string(idx) + " out of range");
      }
    }
    for (std::size_t idx : split.test) {
      if (idx >= num_examples()) {
        fail(Errc::invalid_argument, "container: split '" + name +
                                         "' test index " +
                                         std::to_string(idx) + " out of range");
      }
    }
  }
}

std::vector<std::size_t> DatasetContainer::rows_of_classes(
    std::span<const int> classes) const {
  std::unordered_set<int> wanted(classes.begin(), classes.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (wanted.count(labels[i])) rows.push_back(i);
  }
  return rows;
}

void save_container(const DatasetContainer& ds,
                    const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);

  nlohmann::ordered_json manifest;
  manifest["schema"] = kSchema;
  manifest["num_examples"] = ds.num_examples();
  manifest["feature_dim"] = ds.feature_dim();
  manifest["num_classes"] = ds.num_classes();
  manifest["attr_dim"] = ds.attr_dim();
  manifest["dtype"] = {{"features", "f32"}, {"labels", "i32"},
                       {"attributes", "f32"}};
  manifest["endianness"] = "little";
  manifest["seen_classes"] = ds.seen_classes;
  manifest["unseen_classes"] = ds.unseen_classes;
  nlohmann::ordered_json jsplits = nlohmann::ordered_json::object();
  for (const auto& [name, split] : ds.splits) {
    jsplits[name] = {{"train", split.train}, {"test", split.test}};
  }
  manifest["splits"] = jsplits;

  write_f32_file(dir / "features", ds.x);
  write_i32_file(dir / "labels", ds.labels);
  write_f32_file(dir / "attributes", ds.attrs);
  write_text_atomic(dir / "manifest", manifest.dump(2) + "\n");
}

DatasetContainer load_container(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "manifest"));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_version,
         (dir / "manifest").string() + ": not valid JSON: " + e.what());
  }
  const std::string schema = manifest.value("schema", "");
  if (schema != kSchema) {
    fail(Errc::format_version, (dir / "manifest").string() +
                                   ": unknown schema '" + schema +
                                   "', expected '" + kSchema + "'");
  }

  DatasetContainer ds;
  std::size_t n = 0, d = 0, c = 0, l = 0;
  try {
    n = manifest.at("num_examples").get<std::size_t>();
    d = manifest.at("feature_dim").get<std::size_t>();
    c = manifest.at("num_classes").get<std::size_t>();
    l = manifest.at("attr_dim").get<std::size_t>();
    ds.seen_classes = manifest.at("seen_classes").get<std::vector<int>>();
    ds.unseen_classes = manifest.at("unseen_classes").get<std::vector<int>>();
    if (manifest.contains("splits")) {
      for (const auto& [name, jsplit] : manifest.at("splits").items()) {
        NamedSplit split;
        split.train = jsplit.at("train").get<std::vector<std::size_t>>();
        split.test = jsplit.at("test").get<std::vector<std::size_t>>();
        ds.splits[name] = std::move(split);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_version,
         (dir / "manifest").string() + ": bad manifest field: " + e.what());
  }

  ds.x = read_f32_file(dir / "features", n, d, "features");
  ds.labels = read_i32_file(dir / "labels", n, "labels");
  ds.attrs = read_f32_file(dir / "attributes", c, l, "attributes");
  ds.validate();
  return ds;
}

Tensor average_image_attributes(const Tensor& per_image_attrs,
                                std::span<const int> labels) {
  if (per_image_attrs.rank() != 2 ||
      per_image_attrs.rows() != labels.size()) {
    fail(Errc::dim_mismatch,
         "average_image_attributes: " + std::to_string(labels.size()) +
             " labels for attribute rows " + shape_str(per_image_attrs));
  }
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) {
      fail(Errc::invalid_argument,
           "average_image_attributes: negative label " + std::to_string(y));
    }
    max_label = std::max(max_label, y);
  }
  if (max_label < 0) {
    fail(Errc::invalid_argument, "average_image_attributes: empty input");
  }
  const std::size_t c = static_cast<std::size_t>(max_label) + 1;
  const std::size_t l = per_image_attrs.cols();
  Tensor out({c, l});
  std::vector<std::size_t> counts(c, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    ++counts[y];
    for (std::size_t j = 0; j < l; ++j) {
      out.at(y, j) += per_image_attrs.at(i, j);
    }
  }
  for (std::size_t y = 0; y < c; ++y) {
    if (counts[y] == 0) {
      fail(Errc::invalid_argument,
           "average_image_attributes: class " + std::to_string(y) +
               " has no image rows");
    }
    for (std::size_t j = 0; j < l; ++j) {
      out.at(y, j) /= static_cast<double>(counts[y]);
    }
  }
  return out;
}

std::pair<DatasetContainer, StandardizeTransform> standardize_features(
    const DatasetContainer& ds, std::span<const std::size_t> fit_rows) {
  if (fit_rows.empty()) {
    fail(Errc::invalid_argument, "standardize_features: no rows to fit on");
  }
  const std::size_t d = ds.feature_dim();
  StandardizeTransform tf;
  tf.mean = Tensor({d});
  tf.std = Tensor({d});
  for (std::size_t idx : fit_rows) {
    if (idx >= ds.num_examples()) {
      fail(Errc::invalid_argument,
           "standardize_features: row " + std::to_string(idx) +
               " out of range");
    }
    for (std::size_t j = 0; j < d; ++j) tf.mean[j] += ds.x.at(idx, j);
  }
  const double inv_n = 1.0 / static_cast<double>(fit_rows.size());
  for (std::size_t j = 0; j < d; ++j) tf.mean[j] *= inv_n;
  for (std::size_t idx : fit_rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = ds.x.at(idx, j) - tf.mean[j];
      tf.std[j] += dev * dev;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    tf.std[j] = std::sqrt(tf.std[j] * inv_n);
    if (tf.std[j] == 0.0) tf.std[j] = 1.0;
  }

  DatasetContainer out = ds;
  for (std::size_t i = 0; i < out.num_examples(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out.x.at(i, j) = (out.x.at(i, j) - tf.mean[j]) / tf.std[j];
    }
  }
  return {std::move(out), std::move(tf)};
}

std::pair<DatasetContainer, SyntheticTruth> gen_synthetic_benchmark(
    const SyntheticSpec& spec) {
  if (spec.classes_seen < 1 || spec.classes_unseen < 1 ||
      spec.feature_dim < 1 || spec.attr_dim < 1 || spec.per_class < 1) {
    fail(Errc::invalid_argument,
         "gen_synthetic_benchmark: counts must be >= 1");
  }
  if (spec.noise_sigma < 0.0) {
    fail(Errc::invalid_argument,
         "gen_synthetic_benchmark: noise_sigma must be >= 0");
  }
  if (spec.nuisance_dim > spec.feature_dim) {
    fail(Errc::invalid_argument,
         "gen_synthetic_benchmark: nuisance_dim exceeds feature_dim");
  }

  const std::size_t c_total = spec.classes_seen + spec.classes_unseen;
  const std::size_t d = spec.feature_dim;
  const std::size_t l = spec.attr_dim;

  // Distinct binary attribute rows; duplicates redrawn a bounded number of
  // times so tiny attr_dim fails loudly instead of spinning.
  RngStream attr_rng(derive_seed(spec.seed, StreamId::dataset_attrs, 0));
  Tensor attrs({c_total, l});
  std::set<std::vector<double>> previous;
  for (std::size_t cls = 0; cls < c_total; ++cls) {
    std::vector<double> row(l);
    bool distinct = false;
    for (int attempt = 0; attempt <= 100; ++attempt) {
      for (double& v : row) v = static_cast<double>(attr_rng.uniform_int(2));
      if (!previous.count(row)) {
        distinct = true;
        break;
      }
    }
    if (!distinct) {
      fail(Errc::invalid_argument,
           "gen_synthetic_benchmark: attr_dim " + std::to_string(l) +
               " too small for " + std::to_string(c_total) +
               " distinct attribute rows after 100 redraws");
    }
    previous.insert(row);
    for (std::size_t j = 0; j < l; ++j) attrs.at(cls, j) = row[j];
  }

  RngStream map_rng(derive_seed(spec.seed, StreamId::dataset_map, 0));
  Tensor map({d, l});
  const double map_sigma = 1.0 / std::sqrt(static_cast<double>(l));
  for (std::size_t i = 0; i < map.numel(); ++i) {
    map[i] = map_rng.normal() * map_sigma;
  }

  SyntheticTruth truth;
  truth.map = map;
  truth.class_means = Tensor({c_total, d});
  for (std::size_t cls = 0; cls < c_total; ++cls) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < l; ++j) {
        acc += map.at(i, j) * attrs.at(cls, j);
      }
      truth.class_means.at(cls, i) = quantize_f32(acc);
    }
  }

  DatasetContainer ds;
  ds.x = Tensor({c_total * spec.per_class, d});
  ds.labels.resize(c_total * spec.per_class);
  ds.attrs = attrs;
  for (std::size_t cls = 0; cls < spec.classes_seen; ++cls) {
    ds.seen_classes.push_back(static_cast<int>(cls));
  }
  for (std::size_t cls = spec.classes_seen; cls < c_total; ++cls) {
    ds.unseen_classes.push_back(static_cast<int>(cls));
  }

  std::size_t row_idx = 0;
  for (std::size_t cls = 0; cls < c_total; ++cls) {
    RngStream row_rng(derive_seed(spec.seed, StreamId::dataset_rows, cls));
    std::vector<double> clean(d);
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < l; ++j) {
        acc += map.at(i, j) * attrs.at(cls, j);
      }
      clean[i] = acc;
    }
    for (std::size_t k = 0; k < spec.per_class; ++k, ++row_idx) {
      ds.labels[row_idx] = static_cast<int>(cls);
      double* row = ds.x.data().data() + row_idx * d;
      for (std::size_t i = 0; i < d; ++i) row[i] = clean[i];
      for (std::size_t i = 0; i < spec.nuisance_dim; ++i) {
        row[i] += row_rng.normal();
      }
      for (std::size_t i = 0; i < d; ++i) {
        row[i] = quantize_f32(row[i] + spec.noise_sigma * row_rng.normal());
      }
    }
  }

  ds.validate();
  return {std::move(ds), std::move(truth)};
}

double bayes_oracle_accuracy(const DatasetContainer& ds,
                             const SyntheticTruth& truth,
                             std::span<const std::size_t> eval_rows,
                             std::span<const int> label_space) {
  if (truth.class_means.rank() != 2 ||
      truth.class_means.rows() != ds.num_classes() ||
      truth.class_means.cols() != ds.feature_dim()) {
    fail(Errc::invalid_argument,
         "bayes_oracle_accuracy: truth record does not match container");
  }
  if (label_space.empty()) {
    fail(Errc::invalid_argument, "bayes_oracle_accuracy: empty label space");
  }
  std::vector<int> space(label_space.begin(), label_space.end());
  std::sort(space.begin(), space.end());
  const std::size_t d = ds.feature_dim();

  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
  for (std::size_t idx : eval_rows) {
    if (idx >= ds.num_examples()) {
      fail(Errc::invalid_argument,
           "bayes_oracle_accuracy: row " + std::to_string(idx) +
               " out of range");
    }
    const double* row = ds.x.data().data() + idx * d;
    int best = space.front();
    double best_dist = std::numeric_limits<double>::infinity();
    for (int cls : space) {
      const double* mean =
          truth.class_means.data().data() + static_cast<std::size_t>(cls) * d;
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double dev = row[j] - mean[j];
        dist += dev * dev;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = cls;
      }
    }
    auto& [correct, total] = per_class[ds.labels[idx]];
    ++total;
    if (best == ds.labels[idx]) ++correct;
  }
  if (per_class.empty()) {
    fail(Errc::invalid_argument, "bayes_oracle_accuracy: no rows evaluated");
  }
  double acc = 0.0;
  for (const auto& [cls, counts] : per_class) {
    acc += static_cast<double>(counts.first) /
           static_cast<double>(counts.second);
  }
  return acc / static_cast<double>(per_class.size());
}

}  // namespace segzsl
