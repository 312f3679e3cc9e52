// SPDX-License-Identifier: Apache-2.0
#include "segzsl/report.hpp"

#include <nlohmann/json.hpp>

#include "segzsl/checkpoint.hpp"
#include "segzsl/error.hpp"
#include "segzsl/version.hpp"

namespace segzsl {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kMetricsSchema = "segzsl-metrics/1";

const char* classifier_kind_name(ClassifierKind kind) {
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

ClassifierKind classifier_kind_from(const std::string& name) {
  if (name == "svm") return ClassifierKind::svm;
  if (name == "softmax") return ClassifierKind::softmax;
  if (name == "knn") return ClassifierKind::knn;
  fail(Errc::invalid_argument, "unknown classifier kind '" + name + "'");
}

ordered_json config_json(const ExperimentConfig& cfg) {
  ordered_json train;
  train["lambda_r"] = cfg.train.weights.lambda_r;
  train["lambda_c"] = cfg.train.weights.lambda_c;
  train["lambda_reg"] = cfg.train.weights.lambda_reg;
  train["lambda_e"] = cfg.train.weights.lambda_e;
  train["lr"] = cfg.train.lr;
  train["batch_size"] = cfg.train.batch_size;
  train["pretrain_epochs"] = cfg.train.pretrain_epochs;
  train["joint_epochs"] = cfg.train.joint_epochs;
  train["latent_dim"] = cfg.train.latent_dim;
  train["hidden"] = cfg.train.hidden;
  train["unsup_samples"] = cfg.train.unsup_samples;
  train["latent_mode"] =
      cfg.train.latent_mode == LatentLossMode::posterior ? "posterior"
                                                         : "prior";
  train["early_stop"] = cfg.train.early_stop;
  train["early_stop_patience"] = cfg.train.early_stop_patience;
  train["early_stop_rel_tol"] = cfg.train.early_stop_rel_tol;

  ordered_json classifier;
  classifier["kind"] = classifier_kind_name(cfg.classifier.kind);
  classifier["svm_c"] = cfg.classifier.svm_c;
  classifier["epochs"] = cfg.classifier.epochs;
  classifier["softmax_lr"] = cfg.classifier.softmax_lr;
  classifier["softmax_l2"] = cfg.classifier.softmax_l2;
  ordered_json weights = ordered_json::object();
  for (const auto& [cls, w] : cfg.classifier.class_weights) {
    weights[std::to_string(cls)] = w;
  }
  classifier["class_weights"] = weights;

  ordered_json j;
  j["seed"] = cfg.seed;
  j["train"] = train;
  j["classifier"] = classifier;
  j["exemplars_per_class"] = cfg.exemplars_per_class;
  j["synth_mode"] =
      cfg.synth_mode == SynthesisMode::sample ? "sample" : "mean";
  j["augment_seen"] = cfg.augment_seen;
  j["split_fraction"] = cfg.split_fraction;
  j["unseen_class_weight"] = cfg.unseen_class_weight;
  j["threads"] = cfg.threads;
  return j;
}

ordered_json report_json(const MetricsReport& report) {
  ordered_json j;
  j["schema"] = kMetricsSchema;
  j["mode"] = report.mode;
  j["seed"] = report.seed;
  if (report.acc_seen) j["acc_seen"] = *report.acc_seen;
  if (report.acc_unseen) j["acc_unseen"] = *report.acc_unseen;
  if (report.harmonic) j["H"] = *report.harmonic;
  if (report.acc_zsl) j["acc_zsl"] = *report.acc_zsl;
  ordered_json per_class = ordered_json::object();
  for (const auto& [cls, acc] : report.per_class) {
    per_class[std::to_string(cls)] = acc;
  }
  j["per_class"] = per_class;
  j["config"] = config_json(report.config);
  return j;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& report) {
  return report_json(report).dump(2) + "\n";
}

std::string ablation_to_json(const AblationResult& result) {
  ordered_json j;
  j["schema"] = kMetricsSchema;
  j["mode"] = "ablate";
  j["seed"] = result.full.seed;
  j["full"] = report_json(result.full);
  j["ablated"] = report_json(result.ablated);
  return j.dump(2) + "\n";
}

std::string sweep_to_json(const SweepResult& result) {
  ordered_json j;
  j["schema"] = kMetricsSchema;
  j["mode"] = "sweep";
  j["seed"] = result.seed;
  j["counts"] = result.counts;
  ordered_json acc = ordered_json::object();
  for (const auto& [kind, curve] : result.accuracy) {
    acc[kind] = curve;
  }
  j["accuracy"] = acc;
  j["config"] = config_json(result.config);
  return j.dump(2) + "\n";
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  return config_json(cfg).dump(2) + "\n";
}

ExperimentConfig experiment_config_from_json(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::invalid_argument,
         std::string("config: not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      cfg.train.weights.lambda_r =
          t.value("lambda_r", cfg.train.weights.lambda_r);
      cfg.train.weights.lambda_c =
          t.value("lambda_c", cfg.train.weights.lambda_c);
      cfg.train.weights.lambda_reg =
          t.value("lambda_reg", cfg.train.weights.lambda_reg);
      cfg.train.weights.lambda_e =
          t.value("lambda_e", cfg.train.weights.lambda_e);
      cfg.train.lr = t.value("lr", cfg.train.lr);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.pretrain_epochs =
          t.value("pretrain_epochs", cfg.train.pretrain_epochs);
      cfg.train.joint_epochs = t.value("joint_epochs", cfg.train.joint_epochs);
      cfg.train.latent_dim = t.value("latent_dim", cfg.train.latent_dim);
      cfg.train.hidden = t.value("hidden", cfg.train.hidden);
      cfg.train.unsup_samples =
          t.value("unsup_samples", cfg.train.unsup_samples);
      const std::string mode = t.value("latent_mode", "posterior");
      if (mode == "posterior") {
        cfg.train.latent_mode = LatentLossMode::posterior;
      } else if (mode == "prior") {
        cfg.train.latent_mode = LatentLossMode::prior;
      } else {
        fail(Errc::invalid_argument,
             "config: latent_mode must be 'posterior' or 'prior'");
      }
      cfg.train.early_stop = t.value("early_stop", cfg.train.early_stop);
      cfg.train.early_stop_patience =
          t.value("early_stop_patience", cfg.train.early_stop_patience);
      cfg.train.early_stop_rel_tol =
          t.value("early_stop_rel_tol", cfg.train.early_stop_rel_tol);
    }
    if (j.contains("classifier")) {
      const auto& c = j.at("classifier");
      cfg.classifier.kind =
          classifier_kind_from(c.value("kind", std::string("svm")));
      cfg.classifier.svm_c = c.value("svm_c", cfg.classifier.svm_c);
      cfg.classifier.epochs = c.value("epochs", cfg.classifier.epochs);
      cfg.classifier.softmax_lr =
          c.value("softmax_lr", cfg.classifier.softmax_lr);
      cfg.classifier.softmax_l2 =
          c.value("softmax_l2", cfg.classifier.softmax_l2);
      if (c.contains("class_weights")) {
        for (const auto& [key, value] : c.at("class_weights").items()) {
          cfg.classifier.class_weights[std::stoi(key)] = value.get<double>();
        }
      }
    }
    cfg.exemplars_per_class =
        j.value("exemplars_per_class", cfg.exemplars_per_class);
    const std::string synth = j.value("synth_mode", "sample");
    if (synth == "sample") {
      cfg.synth_mode = SynthesisMode::sample;
    } else if (synth == "mean") {
      cfg.synth_mode = SynthesisMode::mean;
    } else {
      fail(Errc::invalid_argument,
           "config: synth_mode must be 'sample' or 'mean'");
    }
    cfg.augment_seen = j.value("augment_seen", cfg.augment_seen);
    cfg.split_fraction = j.value("split_fraction", cfg.split_fraction);
    cfg.unseen_class_weight =
        j.value("unseen_class_weight", cfg.unseen_class_weight);
    cfg.threads = j.value("threads", cfg.threads);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::invalid_argument,
         std::string("config: bad field: ") + e.what());
  }
  return cfg;
}

std::string synthetic_spec_to_json(const SyntheticSpec& spec) {
  ordered_json j;
  j["classes_seen"] = spec.classes_seen;
  j["classes_unseen"] = spec.classes_unseen;
  j["feature_dim"] = spec.feature_dim;
  j["attr_dim"] = spec.attr_dim;
  j["per_class"] = spec.per_class;
  j["noise_sigma"] = spec.noise_sigma;
  j["nuisance_dim"] = spec.nuisance_dim;
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

SyntheticSpec synthetic_spec_from_json(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::invalid_argument,
         std::string("synthetic spec: not valid JSON: ") + e.what());
  }
  SyntheticSpec spec;
  try {
    spec.classes_seen = j.value("classes_seen", spec.classes_seen);
    spec.classes_unseen = j.value("classes_unseen", spec.classes_unseen);
    spec.feature_dim = j.value("feature_dim", spec.feature_dim);
    spec.attr_dim = j.value("attr_dim", spec.attr_dim);
    spec.per_class = j.value("per_class", spec.per_class);
    spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
    spec.nuisance_dim = j.value("nuisance_dim", spec.nuisance_dim);
    spec.seed = j.value("seed", spec.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::invalid_argument,
         std::string("synthetic spec: bad field: ") + e.what());
  }
  return spec;
}

void write_run_manifest(const std::filesystem::path& path,
                        const RunManifest& manifest) {
  ordered_json j;
  j["command"] = manifest.command;
  j["seed"] = manifest.seed;
  j["config"] = manifest.config_json.empty()
                    ? ordered_json(nullptr)
                    : ordered_json::parse(manifest.config_json);
  j["artifacts"] = manifest.artifacts;
  j["wall_ms"] = manifest.wall_ms;
  j["tool_version"] = manifest.tool_version.empty() ? kVersion
                                                    : manifest.tool_version;
  write_text_atomic(path, j.dump(2) + "\n");
}

}  // namespace segzsl
