// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "segzsl/tensor.hpp"

namespace segzsl {

struct NamedSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Feature/label/attribute container. Features and attributes are stored as
// little-endian 32-bit floats on disk (container schema "segzsl-ds/1") and
// promoted to 64-bit in memory; labels are 32-bit ints. Values produced by
// gen_synthetic_benchmark are rounded through f32 precision up front so a
// save/load round-trip is bit-exact.
struct DatasetContainer {
  Tensor x;                 // N x D
  std::vector<int> labels;  // N, values in [0, C)
  Tensor attrs;             // C x L
  std::vector<int> seen_classes;
  std::vector<int> unseen_classes;
  std::map<std::string, NamedSplit> splits;

  std::size_t num_examples() const { return x.rows(); }
  std::size_t feature_dim() const { return x.cols(); }
  std::size_t num_classes() const { return attrs.rows(); }
  std::size_t attr_dim() const { return attrs.cols(); }

  // Full consistency check; throws on violation.
  void validate() const;

  // Row indices belonging to the given classes.
  std::vector<std::size_t> rows_of_classes(std::span<const int> classes) const;
};

void save_container(const DatasetContainer& ds,
                    const std::filesystem::path& dir);
DatasetContainer load_container(const std::filesystem::path& dir);

// Class-level attributes as the per-class mean of image-level rows. Output
// has max(label)+1 rows; a class id with no image rows is an error.
Tensor average_image_attributes(const Tensor& per_image_attrs,
                                std::span<const int> labels);

struct StandardizeTransform {
  Tensor mean;  // D
  Tensor std;   // D, zero-variance dims pinned to 1
};

// Per-dimension standardization fitted on the given rows (seen-train rows
// only) and applied to every row.
std::pair<DatasetContainer, StandardizeTransform> standardize_features(
    const DatasetContainer& ds, std::span<const std::size_t> fit_rows);

// Synthetic GZSL benchmark: binary attribute rows, a hidden linear
// attribute->feature map W with N(0, 1/L) entries, class-independent nuisance
// noise on the first nuisance_dim coordinates, and isotropic feature noise.
struct SyntheticSpec {
  std::size_t classes_seen = 15;
  std::size_t classes_unseen = 5;
  std::size_t feature_dim = 32;
  std::size_t attr_dim = 16;
  std::size_t per_class = 150;
  double noise_sigma = 0.15;
  std::size_t nuisance_dim = 4;
  std::uint64_t seed = 1;
};

// Hidden generative parameters backing the oracle.
struct SyntheticTruth {
  Tensor map;          // D x L
  Tensor class_means;  // C x D, f32-quantized like the container features
};

std::pair<DatasetContainer, SyntheticTruth> gen_synthetic_benchmark(
    const SyntheticSpec& spec);

// Average per-class accuracy of the nearest-class-mean rule over the given
// label space, evaluated on the given container rows.
double bayes_oracle_accuracy(const DatasetContainer& ds,
                             const SyntheticTruth& truth,
                             std::span<const std::size_t> eval_rows,
                             std::span<const int> label_space);

}  // namespace segzsl
