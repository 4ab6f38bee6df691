// SPDX-License-Identifier: Apache-2.0
//
// Aggregate configuration for the padctl stages. Loaded from a JSON object
// (every field optional), then overridden by command-line flags.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pad/bench_sim.h"
#include "pad/classifier.h"
#include "pad/io.h"
#include "pad/label_pipeline.h"
#include "pad/pivot_gate.h"

namespace pad {

struct LabelSection {
  double alpha = 0.8;
  int n_rollouts = 8;
  int max_steps = 32;
  bool exact = false;
  std::optional<int> sample_cap;
  std::optional<long> rollout_budget;
  std::string judge = "auto";  // auto | none | checksum-repair
};

struct RunConfig {
  SyntheticTaskSpec task;
  GenerationParams generation;
  int gamma = 10;
  GateConfig gate;
  std::vector<double> bench_sigmas = {0.7, 0.5, 0.3};
  LabelSection label;
  TrainConfig train;
  TimingProfile profile;
  double classifier_cost = 0.0;
  double oracle_epsilon = 0.0;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

// Stage seeds are derived from the master seed with these tags.
enum class SeedTag : std::uint64_t { kTask = 1, kLabel = 2, kTrain = 3, kRun = 4, kOracle = 5 };
std::uint64_t stage_seed(const RunConfig& cfg, SeedTag tag);

// jobs is left out: it never changes any output.
Json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const Json& j);
// Reads a JSON object from disk; throws ConfigError on parse errors.
RunConfig load_run_config(const std::filesystem::path& path);

// Parses "t_draft,t_target".
TimingProfile parse_profile(const std::string& text);

LabelConfig label_config(const RunConfig& cfg);
std::unique_ptr<Judge> make_judge(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);

}  // namespace pad
