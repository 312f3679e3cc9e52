// SPDX-License-Identifier: Apache-2.0
#include "segzsl/objectives.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "segzsl/error.hpp"

namespace segzsl {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
}

AttributeBank::AttributeBank(Tensor attrs, std::vector<int> seen,
                             std::vector<int> unseen)
    : attrs_(std::move(attrs)), seen_(std::move(seen)),
      unseen_(std::move(unseen)) {
  if (attrs_.rank() != 2) {
    fail(Errc::shape_mismatch,
         "attribute bank: attrs must be C x L, got " + shape_str(attrs_));
  }
  std::unordered_set<int> seen_set(seen_.begin(), seen_.end());
  if (seen_set.size() != seen_.size()) {
    fail(Errc::invalid_argument, "attribute bank: duplicate seen class id");
  }
  std::unordered_set<int> unseen_set(unseen_.begin(), unseen_.end());
  if (unseen_set.size() != unseen_.size()) {
    fail(Errc::invalid_argument, "attribute bank: duplicate unseen class id");
  }
  for (int c : unseen_) {
    if (seen_set.count(c)) {
      fail(Errc::invalid_argument,
           "attribute bank: class " + std::to_string(c) +
               " is both seen and unseen");
    }
  }
  const int c_total = static_cast<int>(attrs_.rows());
  for (int c : seen_) {
    if (c < 0 || c >= c_total) {
      fail(Errc::invalid_argument,
           "attribute bank: seen class " + std::to_string(c) +
               " has no attribute row");
    }
  }
  for (int c : unseen_) {
    if (c < 0 || c >= c_total) {
      fail(Errc::invalid_argument,
           "attribute bank: unseen class " + std::to_string(c) +
               " has no attribute row");
    }
  }
}

Tensor AttributeBank::row(int class_id) const {
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= attrs_.rows()) {
    fail(Errc::invalid_argument,
         "attribute bank: unknown class id " + std::to_string(class_id));
  }
  const std::size_t l = attrs_.cols();
  Tensor out({l});
  for (std::size_t j = 0; j < l; ++j) {
    out[j] = attrs_.at(static_cast<std::size_t>(class_id), j);
  }
  return out;
}

double kl_diag_gauss(const GaussianDiag& p, const GaussianDiag& q) {
  if (!p.mean.same_shape(p.logvar) || !q.mean.same_shape(q.logvar) ||
      !p.mean.same_shape(q.mean)) {
    fail(Errc::dim_mismatch, "kl_diag_gauss: dimension mismatch (p mean " +
                                 shape_str(p.mean) + ", q mean " +
                                 shape_str(q.mean) + ")");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.mean.numel(); ++i) {
    const double dl = p.logvar[i] - q.logvar[i];
    const double dm = p.mean[i] - q.mean[i];
    acc += std::exp(dl) + dm * dm * std::exp(-q.logvar[i]) - 1.0 - dl;
  }
  return 0.5 * acc;
}

Var kl_diag_gauss_graph(Graph& g, const GaussVars& p, const GaussVars& q) {
  if (!g.value(p.mean).same_shape(g.value(q.mean))) {
    fail(Errc::dim_mismatch,
         "kl_diag_gauss: dimension mismatch (p mean " +
             shape_str(g.value(p.mean)) + ", q mean " +
             shape_str(g.value(q.mean)) + ")");
  }
  Var dl = g.sub(p.logvar, q.logvar);
  Var ratio = g.exp(dl);
  Var dm = g.sub(p.mean, q.mean);
  Var mahal = g.mul(g.square(dm), g.exp(g.neg(q.logvar)));
  Var inner = g.add(g.add(ratio, mahal), g.neg(dl));
  return g.scale(g.sum(g.add_scalar(inner, -1.0)), 0.5);
}

namespace {

void check_batch(const ModelParams& params, const Batch& batch,
                 const char* who) {
  if (batch.x.rank() != 2 || batch.x.rows() == 0) {
    fail(Errc::invalid_argument, std::string(who) + ": empty batch");
  }
  if (batch.x.cols() != params.dims.feature_dim) {
    fail(Errc::dim_mismatch,
         std::string(who) + ": batch features " + shape_str(batch.x) +
             " do not match feature_dim " +
             std::to_string(params.dims.feature_dim));
  }
  if (batch.attrs.rank() != 2 || batch.attrs.rows() != batch.x.rows() ||
      batch.attrs.cols() != params.dims.attr_dim) {
    fail(Errc::dim_mismatch,
         std::string(who) + ": batch attrs " + shape_str(batch.attrs) +
             " do not match (" + std::to_string(batch.x.rows()) + " x " +
             std::to_string(params.dims.attr_dim) + ")");
  }
}

void check_bank(const ModelParams& params, const AttributeBank& bank,
                std::size_t n_samples, const char* who) {
  if (bank.num_classes() == 0) {
    fail(Errc::invalid_argument, std::string(who) + ": empty attribute bank");
  }
  if (bank.attr_dim() != params.dims.attr_dim) {
    fail(Errc::dim_mismatch,
         std::string(who) + ": bank attr dim " +
             std::to_string(bank.attr_dim()) + " does not match model " +
             std::to_string(params.dims.attr_dim));
  }
  if (n_samples < 1) {
    fail(Errc::invalid_argument,
         std::string(who) + ": n_samples must be >= 1");
  }
}

Tensor draw_normal(RngStream& rng, std::size_t rows, std::size_t cols) {
  Tensor t({rows, cols});
  rng.fill_normal(t.data());
  return t;
}

// n attribute rows drawn uniformly over the whole bank (seen and unseen).
Tensor draw_attr_rows(RngStream& rng, const AttributeBank& bank,
                      std::size_t n) {
  const std::size_t c = bank.num_classes();
  const std::size_t l = bank.attr_dim();
  Tensor out({n, l});
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx =
        static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(c)));
    for (std::size_t j = 0; j < l; ++j) out.at(i, j) = bank.attrs().at(idx, j);
  }
  return out;
}

// Total Gaussian NLL of target under (mean, logvar): sums over all entries.
Var recon_nll_total(Graph& g, Var target, const GaussVars& dist) {
  Var diff = g.sub(target, dist.mean);
  Var mahal = g.mul(g.square(diff), g.exp(g.neg(dist.logvar)));
  Var per_dim = g.add_scalar(g.add(mahal, dist.logvar), kLog2Pi);
  return g.scale(g.sum(per_dim), 0.5);
}

GaussVars standard_normal_vars(Graph& g, std::size_t rows, std::size_t cols) {
  return {g.constant(Tensor({rows, cols})), g.constant(Tensor({rows, cols}))};
}

// Builders assume leaves are already bound with the binding the caller wants;
// they only consume rng in the documented order.

Var build_sup(Graph& g, const RegressorLeaves& reg, const Batch& batch) {
  Var x = g.constant(batch.x);
  Var attrs = g.constant(batch.attrs);
  Var pred = regress_graph(g, reg, x);
  Var sq = g.sum(g.square(g.sub(pred, attrs)));
  return g.scale(sq, 0.5 / static_cast<double>(batch.x.rows()));
}

Var build_unsup_like(Graph& g, const ModelParams& params,
                     const GeneratorLeaves& gen, const RegressorLeaves& reg,
                     std::size_t n, const AttributeBank& bank,
                     RngStream& rng) {
  Var z = g.constant(draw_normal(rng, n, params.dims.latent_dim));
  Var attrs = g.constant(draw_attr_rows(rng, bank, n));
  Var eps_x = g.constant(draw_normal(rng, n, params.dims.feature_dim));
  GaussVars out = generate_graph(g, gen, z, attrs);
  Var x_hat = reparameterize_graph(g, out, eps_x);
  Var pred = regress_graph(g, reg, x_hat);
  Var sq = g.sum(g.square(g.sub(pred, attrs)));
  return g.scale(sq, 0.5 / static_cast<double>(n));
}

Var build_vae(Graph& g, const ModelParams& params, const EncoderLeaves& enc,
              const GeneratorLeaves& gen, const Batch& batch,
              RngStream& rng) {
  const std::size_t b = batch.x.rows();
  Var x = g.constant(batch.x);
  Var attrs = g.constant(batch.attrs);
  GaussVars posterior = encode_graph(g, enc, x);
  Var eps_z = g.constant(draw_normal(rng, b, params.dims.latent_dim));
  Var z = reparameterize_graph(g, posterior, eps_z);
  GaussVars out = generate_graph(g, gen, z, attrs);
  Var recon = recon_nll_total(g, x, out);
  GaussVars prior = standard_normal_vars(g, b, params.dims.latent_dim);
  Var kl = kl_diag_gauss_graph(g, posterior, prior);
  return g.scale(g.add(recon, kl), 1.0 / static_cast<double>(b));
}

Var build_sharpness(Graph& g, const ModelParams& params,
                    const GeneratorLeaves& gen, std::size_t n,
                    const AttributeBank& bank, RngStream& rng) {
  Var z = g.constant(draw_normal(rng, n, params.dims.latent_dim));
  Var attrs = g.constant(draw_attr_rows(rng, bank, n));
  Var eps_x = g.constant(draw_normal(rng, n, params.dims.feature_dim));
  GaussVars out = generate_graph(g, gen, z, attrs);
  Var x_hat = reparameterize_graph(g, out, eps_x);
  Var nll = recon_nll_total(g, x_hat, out);
  return g.scale(nll, 1.0 / static_cast<double>(n));
}

Var build_latent_posterior(Graph& g, const ModelParams& params,
                           const EncoderLeaves& enc,
                           const GeneratorLeaves& gen, const Batch& batch,
                           RngStream& rng) {
  const std::size_t b = batch.x.rows();
  Var x = g.constant(batch.x);
  Var attrs = g.constant(batch.attrs);
  GaussVars posterior = encode_graph(g, enc, x);
  Var eps_z = g.constant(draw_normal(rng, b, params.dims.latent_dim));
  Var z = reparameterize_graph(g, posterior, eps_z);
  GaussVars out = generate_graph(g, gen, z, attrs);
  Var eps_x = g.constant(draw_normal(rng, b, params.dims.feature_dim));
  Var x_hat = reparameterize_graph(g, out, eps_x);
  GaussVars recoded = encode_graph(g, enc, x_hat);
  GaussVars target{g.stop_grad(posterior.mean), g.stop_grad(posterior.logvar)};
  Var kl = kl_diag_gauss_graph(g, recoded, target);
  return g.scale(kl, 1.0 / static_cast<double>(b));
}

Var build_latent_prior(Graph& g, const ModelParams& params,
                       const EncoderLeaves& enc, const GeneratorLeaves& gen,
                       std::size_t n, const AttributeBank& bank,
                       RngStream& rng) {
  Var z = g.constant(draw_normal(rng, n, params.dims.latent_dim));
  Var attrs = g.constant(draw_attr_rows(rng, bank, n));
  Var eps_x = g.constant(draw_normal(rng, n, params.dims.feature_dim));
  GaussVars out = generate_graph(g, gen, z, attrs);
  Var x_hat = reparameterize_graph(g, out, eps_x);
  GaussVars recoded = encode_graph(g, enc, x_hat);
  GaussVars prior = standard_normal_vars(g, n, params.dims.latent_dim);
  Var kl = kl_diag_gauss_graph(g, recoded, prior);
  return g.scale(kl, 1.0 / static_cast<double>(n));
}

LossEval finish(Graph& g, Var loss, const BoundParams& bound) {
  g.backward(loss);
  LossEval eval;
  eval.value = g.value(loss).item();
  eval.grads = extract_grads(g, bound);
  return eval;
}

}  // namespace

LossEval loss_sup(const ModelParams& params, const Batch& batch) {
  check_batch(params, batch, "loss_sup");
  Graph g;
  BoundParams bound = bind_params(g, params, BindKind::frozen,
                                  BindKind::frozen, BindKind::trainable);
  Var loss = build_sup(g, bound.regressor, batch);
  return finish(g, loss, bound);
}

LossEval loss_unsup(const ModelParams& params, std::size_t n_samples,
                    const AttributeBank& bank, RngStream& rng) {
  check_bank(params, bank, n_samples, "loss_unsup");
  Graph g;
  BoundParams bound = bind_params(g, params, BindKind::frozen,
                                  BindKind::frozen, BindKind::trainable);
  Var loss = build_unsup_like(g, params, bound.generator, bound.regressor,
                              n_samples, bank, rng);
  return finish(g, loss, bound);
}

RegressorLossEval loss_regressor_total(const ModelParams& params,
                                       const Batch& batch,
                                       std::size_t n_unsup,
                                       const AttributeBank& bank,
                                       const LossWeights& weights,
                                       RngStream& rng) {
  check_batch(params, batch, "loss_regressor_total");
  check_bank(params, bank, n_unsup, "loss_regressor_total");
  Graph g;
  BoundParams bound = bind_params(g, params, BindKind::frozen,
                                  BindKind::frozen, BindKind::trainable);
  Var sup = build_sup(g, bound.regressor, batch);
  Var unsup = build_unsup_like(g, params, bound.generator, bound.regressor,
                               n_unsup, bank, rng);
  Var total = g.add(sup, g.scale(unsup, weights.lambda_r));
  g.backward(total);
  RegressorLossEval eval;
  eval.total = g.value(total).item();
  eval.supervised = g.value(sup).item();
  eval.unsupervised = g.value(unsup).item();
  eval.grads = extract_grads(g, bound);
  return eval;
}

LossEval loss_vae(const ModelParams& params, const Batch& batch,
                  RngStream& rng) {
  check_batch(params, batch, "loss_vae");
  Graph g;
  BoundParams bound = bind_params(g, params, BindKind::trainable,
                                  BindKind::trainable, BindKind::frozen);
  Var loss = build_vae(g, params, bound.encoder, bound.generator, batch, rng);
  return finish(g, loss, bound);
}

LossEval loss_cyclic_attr(const ModelParams& params, std::size_t n_samples,
                          const AttributeBank& bank, RngStream& rng) {
  check_bank(params, bank, n_samples, "loss_cyclic_attr");
  Graph g;
  BoundParams bound = bind_params(g, params, BindKind::frozen,
                                  BindKind::trainable, BindKind::frozen);
  Var loss = build_unsup_like(g, params, bound.generator, bound.regressor,
                              n_samples, bank, rng);
  return finish(g, loss, bound);
}

LossEval loss_reg(const ModelParams& params, std::size_t n_samples,
                  const AttributeBank& bank, RngStream& rng) {
  check_bank(params, bank, n_samples, "loss_reg");
  Graph g;
  BoundParams bound = bind_params(g, params, BindKind::frozen,
                                  BindKind::trainable, BindKind::frozen);
  Var loss =
      build_sharpness(g, params, bound.generator, n_samples, bank, rng);
  return finish(g, loss, bound);
}

LossEval loss_latent_consistency(const ModelParams& params,
                                 LatentLossMode mode, const Batch& batch,
                                 std::size_t n_samples,
                                 const AttributeBank& bank, RngStream& rng) {
  Graph g;
  BoundParams bound = bind_params(g, params, BindKind::trainable,
                                  BindKind::trainable, BindKind::frozen);
  Var loss;
  if (mode == LatentLossMode::posterior) {
    check_batch(params, batch, "loss_latent_consistency");
    loss = build_latent_posterior(g, params, bound.encoder, bound.generator,
                                  batch, rng);
  } else {
    check_bank(params, bank, n_samples, "loss_latent_consistency");
    loss = build_latent_prior(g, params, bound.encoder, bound.generator,
                              n_samples, bank, rng);
  }
  return finish(g, loss, bound);
}

GeneratorLossEval loss_generator_total(const ModelParams& params,
                                       const Batch& batch,
                                       std::size_t n_unsup,
                                       const AttributeBank& bank,
                                       const LossWeights& weights,
                                       LatentLossMode mode, RngStream& rng) {
  check_batch(params, batch, "loss_generator_total");
  check_bank(params, bank, n_unsup, "loss_generator_total");
  Graph g;
  BoundParams bound = bind_params(g, params, BindKind::trainable,
                                  BindKind::trainable, BindKind::frozen);
  Var vae = build_vae(g, params, bound.encoder, bound.generator, batch, rng);
  Var cyclic = build_unsup_like(g, params, bound.generator, bound.regressor,
                                n_unsup, bank, rng);
  Var sharp = build_sharpness(g, params, bound.generator, n_unsup, bank, rng);
  Var latent = mode == LatentLossMode::posterior
                   ? build_latent_posterior(g, params, bound.encoder,
                                            bound.generator, batch, rng)
                   : build_latent_prior(g, params, bound.encoder,
                                        bound.generator, n_unsup, bank, rng);
  Var total = g.add(
      g.add(vae, g.scale(cyclic, weights.lambda_c)),
      g.add(g.scale(sharp, weights.lambda_reg),
            g.scale(latent, weights.lambda_e)));
  g.backward(total);
  GeneratorLossEval eval;
  eval.total = g.value(total).item();
  eval.vae = g.value(vae).item();
  eval.cyclic = g.value(cyclic).item();
  eval.sharpness = g.value(sharp).item();
  eval.latent = g.value(latent).item();
  eval.grads = extract_grads(g, bound);
  return eval;
}

}  // namespace segzsl
