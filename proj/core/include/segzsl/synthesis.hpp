// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "segzsl/networks.hpp"
#include "segzsl/objectives.hpp"
#include "segzsl/tensor.hpp"

namespace segzsl {

enum class Provenance : std::uint8_t { real, synthesized };

// Labeled feature rows used as classifier training data. Provenance is
// tracked per row so real and synthesized sets can be concatenated.
struct ExemplarSet {
  Tensor features;  // M x D
  std::vector<int> labels;
  std::vector<Provenance> provenance;

  std::size_t size() const { return labels.size(); }
};

ExemplarSet concat(const ExemplarSet& a, const ExemplarSet& b);

enum class SynthesisMode {
  sample,  // x = generator mean + sigma * eps
  mean,    // x = generator mean
};

// n exemplars for one class: z drawn from the standard-normal prior, features
// from the conditional generator. Deterministic per (seed, class id): draws
// come from RngStream(derive_seed(seed, synthesis, class_id)), per draw first
// the latent vector, then (sample mode only) the output noise.
ExemplarSet synthesize_class(const ModelParams& params,
                             const Tensor& class_attr, int class_id,
                             std::size_t n, std::uint64_t seed,
                             SynthesisMode mode);

// Per-class synthesis for every requested class. Per-class streams make the
// output rows for one class independent of which other classes are requested
// and of the request order; rows are emitted grouped by the classes' given
// order. When threads > 1, classes are synthesized in parallel and merged
// deterministically.
ExemplarSet synthesize_all(const ModelParams& params,
                           const AttributeBank& bank,
                           std::span<const int> classes,
                           std::size_t n_per_class, std::uint64_t seed,
                           SynthesisMode mode, std::size_t threads = 1);

// Regressor point estimate of p(a|x) per row: M x L.
Tensor impute_attributes(const ModelParams& params, const Tensor& x_unlabeled);

}  // namespace segzsl
