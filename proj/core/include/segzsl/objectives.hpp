// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "segzsl/networks.hpp"
#include "segzsl/rng.hpp"
#include "segzsl/tensor.hpp"

namespace segzsl {

// Weights of the combined objectives. All four default to 0.1.
struct LossWeights {
  double lambda_r = 0.1;    // unsupervised term in the regressor objective
  double lambda_c = 0.1;    // cyclic attribute-consistency term
  double lambda_reg = 0.1;  // generator sharpness regularizer
  double lambda_e = 0.1;    // latent-consistency term
};

// Class-attribute rows plus the seen/unseen partition. Class ids index rows
// directly. Attribute draws for the unsupervised losses are uniform over all
// rows, seen and unseen alike.
class AttributeBank {
 public:
  AttributeBank() = default;
  AttributeBank(Tensor attrs, std::vector<int> seen, std::vector<int> unseen);

  const Tensor& attrs() const { return attrs_; }
  std::size_t num_classes() const { return attrs_.rows(); }
  std::size_t attr_dim() const { return attrs_.cols(); }
  const std::vector<int>& seen() const { return seen_; }
  const std::vector<int>& unseen() const { return unseen_; }

  // Attribute row of a class as a vector.
  Tensor row(int class_id) const;

 private:
  Tensor attrs_;  // C x L
  std::vector<int> seen_, unseen_;
};

// A labeled minibatch with attributes already resolved per example.
struct Batch {
  Tensor x;      // B x D
  Tensor attrs;  // B x L, row n = a_{y_n}
};

// Latent-consistency target: q is either the (stop-gradient) posterior of the
// matching labeled example or the standard-normal prior.
enum class LatentLossMode { posterior, prior };

// Value plus per-group gradients of one loss evaluation. Groups a loss does
// not touch (or that it treats as constants) come back as exact zeros.
struct LossEval {
  double value = 0.0;
  ModelGrads grads;
};

// Component breakdown of the combined objectives, for logging.
struct RegressorLossEval {
  double total = 0.0;
  double supervised = 0.0;
  double unsupervised = 0.0;
  ModelGrads grads;
};

struct GeneratorLossEval {
  double total = 0.0;
  double vae = 0.0;
  double cyclic = 0.0;
  double sharpness = 0.0;
  double latent = 0.0;
  ModelGrads grads;
};

// KL(p || q) for diagonal Gaussians, closed form; >= 0, 0 iff p == q.
double kl_diag_gauss(const GaussianDiag& p, const GaussianDiag& q);
Var kl_diag_gauss_graph(Graph& g, const GaussVars& p, const GaussVars& q);

// Draw order contract: every sampled loss consumes its RngStream in a fixed,
// documented order so that two losses sharing a seed see identical draws.
//   - vae / latent(posterior): eps_z (B x d_z row-major), then for the
//     latent loss eps_x (B x D).
//   - unsup / cyclic / sharpness / latent(prior): z (n x d_z), then n
//     attribute row indices, then eps_x (n x D).
// The combined objectives evaluate their components in the declared order
// (vae, cyclic, sharpness, latent; supervised, unsupervised), each consuming
// the stream as above regardless of its lambda.

// Eq-style supervised regressor loss: mean_n 1/2 ||regress(x_n) - a_{y_n}||^2.
LossEval loss_sup(const ModelParams& params, const Batch& batch);

// Unsupervised regressor loss on generator samples; the generator is treated
// as fixed, so only the regressor group receives gradient.
LossEval loss_unsup(const ModelParams& params, std::size_t n_samples,
                    const AttributeBank& bank, RngStream& rng);

// L_Sup + lambda_r * L_Unsup.
RegressorLossEval loss_regressor_total(const ModelParams& params,
                                       const Batch& batch,
                                       std::size_t n_unsup,
                                       const AttributeBank& bank,
                                       const LossWeights& weights,
                                       RngStream& rng);

// Conditional VAE loss: Gaussian reconstruction NLL + KL(posterior || prior).
LossEval loss_vae(const ModelParams& params, const Batch& batch,
                  RngStream& rng);

// Cyclic attribute consistency: same functional form as loss_unsup but the
// regressor is the fixed side and gradient flows through the sampled
// exemplar into the generator.
LossEval loss_cyclic_attr(const ModelParams& params, std::size_t n_samples,
                          const AttributeBank& bank, RngStream& rng);

// Generator sharpness regularizer: mean negative log-density of the
// reparameterized sample under its own output distribution.
LossEval loss_reg(const ModelParams& params, std::size_t n_samples,
                  const AttributeBank& bank, RngStream& rng);

// Latent consistency: KL(encode(x_hat) || q). posterior mode requires a
// labeled batch; prior mode samples z and attributes like loss_reg.
LossEval loss_latent_consistency(const ModelParams& params,
                                 LatentLossMode mode, const Batch& batch,
                                 std::size_t n_samples,
                                 const AttributeBank& bank, RngStream& rng);

// L_VAE + lambda_c * L_c + lambda_reg * L_Reg + lambda_e * L_E.
GeneratorLossEval loss_generator_total(const ModelParams& params,
                                       const Batch& batch,
                                       std::size_t n_unsup,
                                       const AttributeBank& bank,
                                       const LossWeights& weights,
                                       LatentLossMode mode, RngStream& rng);

}  // namespace segzsl
