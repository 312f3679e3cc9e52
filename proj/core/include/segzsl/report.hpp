// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segzsl/data.hpp"
#include "segzsl/protocol.hpp"

namespace segzsl {

// JSON boundary for the metrics schema "segzsl-metrics/1". Key order is
// fixed, so identical runs serialize to identical bytes. Wall-clock data
// never goes into these documents; it lives in the run manifest.
std::string metrics_to_json(const MetricsReport& report);
std::string ablation_to_json(const AblationResult& result);
std::string sweep_to_json(const SweepResult& result);

// Config round-trip used by the CLI's --config file and by the config echo
// inside reports.
std::string experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const std::string& json);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const std::string& json);

// Side file recording how a run was produced. Written atomically at the end
// of a command; this is the only place wall time appears.
struct RunManifest {
  std::string command;
  std::string config_json;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  double wall_ms = 0.0;
  std::string tool_version;
};

void write_run_manifest(const std::filesystem::path& path,
                        const RunManifest& manifest);

}  // namespace segzsl
