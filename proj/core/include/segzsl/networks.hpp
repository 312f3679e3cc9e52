// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "segzsl/graph.hpp"
#include "segzsl/tensor.hpp"

namespace segzsl {

// Network dimensions: feature_dim is the example width D, attr_dim the
// class-attribute width L, latent_dim the unstructured code width, hidden the
// width of every hidden layer.
struct Dims {
  std::size_t feature_dim = 0;
  std::size_t attr_dim = 0;
  std::size_t latent_dim = 64;
  std::size_t hidden = 512;

  bool operator==(const Dims&) const = default;
};

// Diagonal Gaussian. Vectors for a single distribution, or rank-2 tensors
// holding one distribution per row. logvar is clamped to kLogvarLo/Hi by
// every network forward pass.
struct GaussianDiag {
  Tensor mean;
  Tensor logvar;
};

inline constexpr double kLogvarLo = -6.0;
inline constexpr double kLogvarHi = 2.0;

// Two hidden ReLU layers (D -> h -> h), then linear mean/logvar heads of
// width latent_dim.
struct EncoderParams {
  Tensor w1, b1;
  Tensor w2, b2;
  Tensor w_mean, b_mean;
  Tensor w_logvar, b_logvar;

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

// One hidden ReLU layer ((latent_dim + L) -> h), then linear mean/logvar
// heads of width D.
struct GeneratorParams {
  Tensor w1, b1;
  Tensor w_mean, b_mean;
  Tensor w_logvar, b_logvar;

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

// One hidden ReLU layer (D -> h), then a linear head of width L. The output
// distribution is N(head, I): unit variance is fixed, so only the mean is
// produced.
struct RegressorParams {
  Tensor w1, b1;
  Tensor w_out, b_out;

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

struct ModelParams {
  Dims dims;
  EncoderParams encoder;
  GeneratorParams generator;
  RegressorParams regressor;
};

// Weights uniform on (-b, b) with b = sqrt(6 / (fan_in + fan_out)), biases
// zero. Deterministic per seed.
ModelParams init_params(const Dims& dims, std::uint64_t seed);

// ---- value-mode forward passes (no graph, used for synthesis/eval) ----
// x may be a single vector or a rank-2 batch of rows; outputs match.

GaussianDiag encode(const ModelParams& params, const Tensor& x);
Tensor reparameterize(const GaussianDiag& g, const Tensor& eps);
GaussianDiag generate(const ModelParams& params, const Tensor& z,
                      const Tensor& attrs);
Tensor regress(const ModelParams& params, const Tensor& x);

// ---- graph-mode forward passes (training) ----

enum class BindKind {
  trainable,  // gradients accumulate into the group's leaves
  frozen,     // parameters enter through stop_grad; leaf gradients stay zero
};

struct GaussVars {
  Var mean;
  Var logvar;
};

struct EncoderLeaves {
  Var w1, b1, w2, b2, w_mean, b_mean, w_logvar, b_logvar;
};
struct GeneratorLeaves {
  Var w1, b1, w_mean, b_mean, w_logvar, b_logvar;
};
struct RegressorLeaves {
  Var w1, b1, w_out, b_out;
};

// Leaves for one bound model. `raw` vars are the underlying leaf nodes (grad
// buffers are read from these, in the same order as the params' tensors());
// the per-network structs hold the vars ops should consume, which are
// stop_grad wrappers when the group is frozen.
struct BoundParams {
  EncoderLeaves encoder;
  GeneratorLeaves generator;
  RegressorLeaves regressor;
  std::vector<Var> raw_encoder, raw_generator, raw_regressor;
};

BoundParams bind_params(Graph& g, const ModelParams& params, BindKind enc,
                        BindKind gen, BindKind reg);

GaussVars encode_graph(Graph& g, const EncoderLeaves& enc, Var x);
Var reparameterize_graph(Graph& g, const GaussVars& gauss, Var eps);
GaussVars generate_graph(Graph& g, const GeneratorLeaves& gen, Var z,
                         Var attrs);
Var regress_graph(Graph& g, const RegressorLeaves& reg, Var x);

// Gradients per group in tensors() order; zeros for frozen groups.
struct ModelGrads {
  std::vector<Tensor> encoder;
  std::vector<Tensor> generator;
  std::vector<Tensor> regressor;
};

ModelGrads extract_grads(const Graph& g, const BoundParams& bound);

// Checkpoint file (see checkpoint.hpp for the framing). Round-trips are
// bit-exact.
void save_checkpoint(const ModelParams& params,
                     const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace segzsl
