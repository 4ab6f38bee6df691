// SPDX-License-Identifier: Apache-2.0

#include "pad/run_config.h"

#include <fstream>

#include "pad/errors.h"

namespace pad {

void RunConfig::validate() const {
  task.validate();
  generation.validate();
  if (gamma < 1) throw ConfigError("gamma must be >= 1");
  gate.validate();
  for (double s : bench_sigmas) {
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("bench sigma must be in [0, 1]");
  }
  label_config(*this).validate();
  if (label.judge != "auto" && label.judge != "none" && label.judge != "checksum-repair") {
    throw ConfigError("unknown judge '" + label.judge + "'");
  }
  train_config(*this).validate();
  profile.validate();
  if (classifier_cost < 0.0) throw ConfigError("classifier cost must be >= 0");
  if (oracle_epsilon < 0.0) throw ConfigError("oracle epsilon must be >= 0");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

std::uint64_t stage_seed(const RunConfig& cfg, SeedTag tag) {
  return derive_seed(cfg.seed, {static_cast<std::uint64_t>(tag)});
}

Json to_json(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  Json task = to_json(cfg.task);
  task.erase("seed");
  j["task"] = task;
  j["generation"] = to_json(cfg.generation);
  j["gamma"] = cfg.gamma;
  j["gate"] = {{"sigma", cfg.gate.sigma}, {"prob_floor", cfg.gate.prob_floor}};
  j["bench_sigmas"] = cfg.bench_sigmas;
  Json label;
  label["alpha"] = cfg.label.alpha;
  label["rollouts"] = cfg.label.n_rollouts;
  label["max_steps"] = cfg.label.max_steps;
  label["exact"] = cfg.label.exact;
  label["sample_cap"] = cfg.label.sample_cap ? Json(*cfg.label.sample_cap) : Json(nullptr);
  label["rollout_budget"] =
      cfg.label.rollout_budget ? Json(*cfg.label.rollout_budget) : Json(nullptr);
  label["judge"] = cfg.label.judge;
  j["label"] = label;
  Json train;
  train["d_u"] = cfg.train.dims.d_u;
  train["d_v"] = cfg.train.dims.d_v;
  train["d_f"] = cfg.train.dims.d_f;
  train["split"] = cfg.train.split;
  train["epochs"] = cfg.train.epochs;
  train["learning_rate"] = cfg.train.learning_rate;
  train["batch_size"] = cfg.train.batch_size;
  j["train"] = train;
  j["profile"] = {{"t_draft", cfg.profile.t_draft}, {"t_target", cfg.profile.t_target}};
  j["classifier_cost"] = cfg.classifier_cost;
  j["oracle_epsilon"] = cfg.oracle_epsilon;
  return j;
}

namespace {

template <typename T>
void read_into(const Json& j, const char* name, T& dst) {
  if (!j.contains(name) || j[name].is_null()) return;
  try {
    dst = j[name].get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + name + "': " + e.what());
  }
}

template <typename T>
void read_optional(const Json& j, const char* name, std::optional<T>& dst) {
  if (!j.contains(name)) return;
  if (j[name].is_null()) {
    dst.reset();
    return;
  }
  T v{};
  read_into(j, name, v);
  dst = v;
}

}  // namespace

RunConfig run_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  read_into(j, "seed", cfg.seed);
  if (j.contains("task")) {
    Json task = j["task"];
    task["seed"] = 0;  // replaced by the derived task seed below
    cfg.task = task_spec_from_json(task);
  }
  if (j.contains("generation")) {
    const Json& g = j["generation"];
    read_into(g, "temperature", cfg.generation.temperature);
    read_into(g, "top_p", cfg.generation.top_p);
    read_optional(g, "top_k", cfg.generation.top_k);
    read_into(g, "max_len", cfg.generation.max_len);
  }
  read_into(j, "gamma", cfg.gamma);
  if (j.contains("gate")) {
    read_into(j["gate"], "sigma", cfg.gate.sigma);
    read_into(j["gate"], "prob_floor", cfg.gate.prob_floor);
  }
  read_into(j, "bench_sigmas", cfg.bench_sigmas);
  if (j.contains("label")) {
    const Json& l = j["label"];
    read_into(l, "alpha", cfg.label.alpha);
    read_into(l, "rollouts", cfg.label.n_rollouts);
    read_into(l, "max_steps", cfg.label.max_steps);
    read_into(l, "exact", cfg.label.exact);
    read_optional(l, "sample_cap", cfg.label.sample_cap);
    read_optional(l, "rollout_budget", cfg.label.rollout_budget);
    read_into(l, "judge", cfg.label.judge);
  }
  if (j.contains("train")) {
    const Json& t = j["train"];
    read_into(t, "d_u", cfg.train.dims.d_u);
    read_into(t, "d_v", cfg.train.dims.d_v);
    read_into(t, "d_f", cfg.train.dims.d_f);
    read_into(t, "split", cfg.train.split);
    read_into(t, "epochs", cfg.train.epochs);
    read_into(t, "learning_rate", cfg.train.learning_rate);
    read_into(t, "batch_size", cfg.train.batch_size);
  }
  if (j.contains("profile")) {
    read_into(j["profile"], "t_draft", cfg.profile.t_draft);
    read_into(j["profile"], "t_target", cfg.profile.t_target);
  }
  read_into(j, "classifier_cost", cfg.classifier_cost);
  read_into(j, "oracle_epsilon", cfg.oracle_epsilon);
  read_into(j, "jobs", cfg.jobs);
  cfg.task.seed = stage_seed(cfg, SeedTag::kTask);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

TimingProfile parse_profile(const std::string& text) {
  const auto bad = [&] { return ConfigError("--profile expects t_draft,t_target, got '" + text + "'"); };
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw bad();
  const auto number = [&](const std::string& part) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::exception&) {
      throw bad();
    }
    if (used != part.size()) throw bad();
    return v;
  };
  TimingProfile p{number(text.substr(0, comma)), number(text.substr(comma + 1))};
  p.validate();
  return p;
}

LabelConfig label_config(const RunConfig& cfg) {
  LabelConfig l;
  l.alpha = cfg.label.alpha;
  l.n_rollouts = cfg.label.n_rollouts;
  l.max_steps = cfg.label.max_steps;
  l.params = cfg.generation;
  l.seed = stage_seed(cfg, SeedTag::kLabel);
  l.exact_when_enumerable = cfg.label.exact;
  l.sample_cap = cfg.label.sample_cap;
  l.rollout_budget = cfg.label.rollout_budget;
  l.jobs = cfg.jobs;
  return l;
}

std::unique_ptr<Judge> make_judge(const RunConfig& cfg) {
  const bool repair = cfg.label.judge == "checksum-repair" ||
                      (cfg.label.judge == "auto" && cfg.task.utility.kind == UtilityKind::kChecksum);
  if (repair) return std::make_unique<ChecksumRepairJudge>(cfg.task.vocab_size);
  return std::make_unique<AlwaysSoundJudge>();
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t = cfg.train;
  t.dims.d_h = cfg.task.hidden_dim;
  t.seed = stage_seed(cfg, SeedTag::kTrain);
  return t;
}

}  // namespace pad
