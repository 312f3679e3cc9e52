// SPDX-License-Identifier: Apache-2.0
#include "segzsl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "segzsl/checkpoint.hpp"
#include "segzsl/error.hpp"

namespace segzsl {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

std::vector<const Tensor*> group_ptrs_const(
    const std::vector<Tensor*>& tensors) {
  return {tensors.begin(), tensors.end()};
}

AdamConfig adam_config(const TrainConfig& cfg) {
  AdamConfig a;
  a.lr = cfg.lr;
  return a;
}

std::vector<Tensor*> encoder_generator_tensors(ModelParams& p) {
  std::vector<Tensor*> out = p.encoder.tensors();
  for (Tensor* t : p.generator.tensors()) out.push_back(t);
  return out;
}

std::vector<Tensor> concat_grads(const ModelGrads& g) {
  std::vector<Tensor> out = g.encoder;
  out.insert(out.end(), g.generator.begin(), g.generator.end());
  return out;
}

void format_double(std::ostream& os, double v) {
  std::ostringstream tmp;
  tmp.precision(17);
  tmp << v;
  os << tmp.str();
}

void check_config(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) {
    fail(Errc::invalid_argument, "train config: batch_size must be >= 1");
  }
  if (!(cfg.lr > 0.0)) {
    fail(Errc::invalid_argument, "train config: lr must be > 0");
  }
  if (cfg.weights.lambda_r < 0.0 || cfg.weights.lambda_c < 0.0 ||
      cfg.weights.lambda_reg < 0.0 || cfg.weights.lambda_e < 0.0) {
    fail(Errc::invalid_argument, "train config: loss weights must be >= 0");
  }
}

}  // namespace

void TrainLog::save(const std::filesystem::path& path) const {
  std::ostringstream os;
  for (const EpochRecord& rec : epochs) {
    os << "{\"phase\":\"" << rec.phase << "\",\"epoch\":" << rec.epoch
       << ",\"loss_vae\":";
    format_double(os, rec.loss_vae);
    os << ",\"loss_regressor\":";
    if (rec.loss_regressor) {
      format_double(os, *rec.loss_regressor);
    } else {
      os << "null";
    }
    os << ",\"loss_generator\":";
    if (rec.loss_generator) {
      format_double(os, *rec.loss_generator);
    } else {
      os << "null";
    }
    os << ",\"wall_ms\":";
    format_double(os, rec.wall_ms);
    os << "}\n";
  }
  write_text_atomic(path, os.str());
}

Trainer::Trainer(Dims dims, const TrainConfig& cfg)
    : Trainer(init_params({dims.feature_dim, dims.attr_dim, cfg.latent_dim,
                           cfg.hidden},
                          derive_seed(cfg.seed, StreamId::train, 0)),
              cfg) {}

Trainer::Trainer(ModelParams params, const TrainConfig& cfg)
    : params_(std::move(params)),
      cfg_(cfg),
      adam_regressor_("regressor", adam_config(cfg),
                      group_ptrs_const(params_.regressor.tensors())),
      adam_encoder_generator_(
          "encoder_generator", adam_config(cfg),
          group_ptrs_const(encoder_generator_tensors(params_))) {
  check_config(cfg_);
}

Batch Trainer::gather_batch(const TrainingSet& data, const AttributeBank& bank,
                            std::span<const std::size_t> rows) const {
  const std::size_t d = data.x.cols();
  const std::size_t l = bank.attr_dim();
  Batch batch;
  batch.x = Tensor({rows.size(), d});
  batch.attrs = Tensor({rows.size(), l});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t src = rows[i];
    const double* xin = data.x.data().data() + src * d;
    std::copy(xin, xin + d, batch.x.data().data() + i * d);
    const int cls = data.labels[src];
    if (cls < 0 || static_cast<std::size_t>(cls) >= bank.num_classes()) {
      fail(Errc::invalid_argument,
           "train: label " + std::to_string(cls) + " not covered by bank");
    }
    for (std::size_t j = 0; j < l; ++j) {
      batch.attrs.at(i, j) = bank.attrs().at(static_cast<std::size_t>(cls), j);
    }
  }
  return batch;
}

void Trainer::check_finite(const char* phase, std::size_t epoch,
                           std::size_t batch) {
  auto scan = [&](const auto& group) {
    for (const Tensor* t : group) {
      if (!t->all_finite()) return false;
    }
    return true;
  };
  if (!scan(params_.encoder.tensors()) || !scan(params_.generator.tensors()) ||
      !scan(params_.regressor.tensors())) {
    fail(Errc::numeric_failure,
         std::string("train: non-finite parameters after ") + phase +
             " epoch " + std::to_string(epoch) + " batch " +
             std::to_string(batch));
  }
}

double Trainer::vae_step(const Batch& batch) {
  RngStream rng(derive_seed(cfg_.seed, StreamId::sampler, global_step_++));
  LossEval eval = loss_vae(params_, batch, rng);
  if (!std::isfinite(eval.value)) {
    fail(Errc::numeric_failure, "train: non-finite VAE loss");
  }
  std::vector<Tensor*> target = encoder_generator_tensors(params_);
  adam_encoder_generator_.step(target, concat_grads(eval.grads));
  return eval.value;
}

RegressorLossEval Trainer::regressor_step(const Batch& batch,
                                          const AttributeBank& bank) {
  RngStream rng(derive_seed(cfg_.seed, StreamId::sampler, global_step_++));
  RegressorLossEval eval = loss_regressor_total(
      params_, batch, cfg_.effective_unsup_samples(), bank, cfg_.weights, rng);
  if (!std::isfinite(eval.total)) {
    fail(Errc::numeric_failure, "train: non-finite regressor loss");
  }
  std::vector<Tensor*> target = params_.regressor.tensors();
  adam_regressor_.step(target, eval.grads.regressor);
  return eval;
}

GeneratorLossEval Trainer::generator_step(const Batch& batch,
                                          const AttributeBank& bank) {
  RngStream rng(derive_seed(cfg_.seed, StreamId::sampler, global_step_++));
  GeneratorLossEval eval = loss_generator_total(
      params_, batch, cfg_.effective_unsup_samples(), bank, cfg_.weights,
      cfg_.latent_mode, rng);
  if (!std::isfinite(eval.total)) {
    fail(Errc::numeric_failure, "train: non-finite generator loss");
  }
  std::vector<Tensor*> target = encoder_generator_tensors(params_);
  adam_encoder_generator_.step(target, concat_grads(eval.grads));
  return eval;
}

void Trainer::pretrain(const TrainingSet& data, const AttributeBank& bank) {
  if (data.x.rank() != 2 || data.x.rows() == 0) {
    fail(Errc::invalid_argument, "pretrain: empty training set");
  }
  const std::size_t n = data.x.rows();
  for (std::size_t epoch = 0; epoch < cfg_.pretrain_epochs; ++epoch) {
    const auto start = Clock::now();
    RngStream shuffle_rng(
        derive_seed(cfg_.seed, StreamId::shuffle, global_epoch_++));
    std::vector<std::size_t> order = shuffle_rng.permutation(n);
    double vae_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t off = 0; off < n; off += cfg_.batch_size) {
      const std::size_t take = std::min(cfg_.batch_size, n - off);
      Batch batch = gather_batch(
          data, bank, std::span<const std::size_t>(order).subspan(off, take));
      try {
        vae_sum += vae_step(batch);
      } catch (const Error& e) {
        if (e.code() == Errc::numeric_failure) {
          fail(Errc::numeric_failure,
               "pretrain epoch " + std::to_string(epoch) + " batch " +
                   std::to_string(batches) + ": " + e.what());
        }
        throw;
      }
      ++batches;
      check_finite("pretrain", epoch, batches - 1);
    }
    EpochRecord rec;
    rec.phase = "pretrain";
    rec.epoch = epoch;
    rec.loss_vae = vae_sum / static_cast<double>(batches);
    rec.wall_ms = ms_since(start);
    log_.epochs.push_back(std::move(rec));
  }
}

void Trainer::joint_train(const TrainingSet& data, const AttributeBank& bank) {
  if (data.x.rank() != 2 || data.x.rows() == 0) {
    fail(Errc::invalid_argument, "joint_train: empty training set");
  }
  const std::size_t n = data.x.rows();
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < cfg_.joint_epochs; ++epoch) {
    const auto start = Clock::now();
    RngStream shuffle_rng(
        derive_seed(cfg_.seed, StreamId::shuffle, global_epoch_++));
    std::vector<std::size_t> order = shuffle_rng.permutation(n);
    double vae_sum = 0.0;
    double reg_sum = 0.0;
    double gen_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t off = 0; off < n; off += cfg_.batch_size) {
      const std::size_t take = std::min(cfg_.batch_size, n - off);
      Batch batch = gather_batch(
          data, bank, std::span<const std::size_t>(order).subspan(off, take));
      try {
        RegressorLossEval reg = regressor_step(batch, bank);
        GeneratorLossEval gen = generator_step(batch, bank);
        reg_sum += reg.total;
        gen_sum += gen.total;
        vae_sum += gen.vae;
      } catch (const Error& e) {
        if (e.code() == Errc::numeric_failure) {
          fail(Errc::numeric_failure,
               "joint epoch " + std::to_string(epoch) + " batch " +
                   std::to_string(batches) + ": " + e.what());
        }
        throw;
      }
      ++batches;
      check_finite("joint", epoch, batches - 1);
    }
    EpochRecord rec;
    rec.phase = "joint";
    rec.epoch = epoch;
    rec.loss_vae = vae_sum / static_cast<double>(batches);
    rec.loss_regressor = reg_sum / static_cast<double>(batches);
    rec.loss_generator = gen_sum / static_cast<double>(batches);
    rec.wall_ms = ms_since(start);
    log_.epochs.push_back(rec);

    if (cfg_.early_stop) {
      const double current = *rec.loss_generator;
      if (best - current > cfg_.early_stop_rel_tol * std::abs(best)) {
        best = current;
        stale = 0;
      } else if (++stale >= cfg_.early_stop_patience) {
        break;
      }
    }
  }
}

std::pair<ModelParams, TrainLog> train(const TrainingSet& data_seen,
                                       const AttributeBank& bank,
                                       const TrainConfig& cfg) {
  if (data_seen.x.rank() != 2 || data_seen.x.rows() == 0) {
    fail(Errc::invalid_argument, "train: empty training set");
  }
  if (data_seen.labels.size() != data_seen.x.rows()) {
    fail(Errc::dim_mismatch,
         "train: " + std::to_string(data_seen.labels.size()) +
             " labels for " + std::to_string(data_seen.x.rows()) + " rows");
  }
  Dims dims{data_seen.x.cols(), bank.attr_dim(), cfg.latent_dim, cfg.hidden};
  Trainer trainer(dims, cfg);
  trainer.pretrain(data_seen, bank);
  trainer.joint_train(data_seen, bank);
  return {trainer.params(), trainer.log()};
}

}  // namespace segzsl
