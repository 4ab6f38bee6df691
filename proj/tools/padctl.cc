// SPDX-License-Identifier: Apache-2.0
//
// padctl: stage-oriented driver. Each subcommand reads persisted inputs from
// --in (default: --out) plus the resolved config and writes JSONL artifacts
// to --out:
//   synth  -> task.jsonl
//   label  -> labels.jsonl
//   train  -> mlp.jsonl, train_report.jsonl
//   eval   -> roc.jsonl, roc.csv
//   run    -> report-<decoder>.jsonl, audit-<decoder>.jsonl
//   bench  -> bench.jsonl, bench.txt

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pad/bench_sim.h"
#include "pad/classifier.h"
#include "pad/errors.h"
#include "pad/io.h"
#include "pad/label_pipeline.h"
#include "pad/run_config.h"

namespace fs = std::filesystem;
using namespace pad;

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string in;
  int jobs = 1;
  double sigma = 0.7;
  double prob_floor = kDefaultProbFloor;
  double alpha = 0.8;
  int gamma = 10;
  int rollouts = 8;
  std::string profile;
  bool oracle = false;
  std::string params;
  std::string decoder = "sd";
  std::vector<double> sigmas;
  int vocab = 0;
  int order = 0;
  double perturbation = 0.0;
  std::string utility;
  int contexts = 0;
  int max_len = 0;
  int sample_cap = 0;
  bool exact = false;

  CLI::App* app = nullptr;
  bool given(const std::string& name) const {
    const CLI::Option* o = app->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  }
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run config");
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--in", f.in, "input directory (default: --out)");
  sub->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
}

RunConfig resolve(const Flags& f) {
  RunConfig cfg = f.config.empty() ? run_config_from_json(Json::object()) : load_run_config(f.config);
  if (f.given("--seed")) {
    cfg.seed = f.seed;
    cfg.task.seed = stage_seed(cfg, SeedTag::kTask);
  }
  if (f.given("--jobs")) cfg.jobs = f.jobs;
  if (f.given("--sigma")) cfg.gate.sigma = f.sigma;
  if (f.given("--prob-floor")) cfg.gate.prob_floor = f.prob_floor;
  if (f.given("--alpha")) cfg.label.alpha = f.alpha;
  if (f.given("--gamma")) cfg.gamma = f.gamma;
  if (f.given("--rollouts")) cfg.label.n_rollouts = f.rollouts;
  if (f.given("--profile")) cfg.profile = parse_profile(f.profile);
  if (f.given("--sigmas")) cfg.bench_sigmas = f.sigmas;
  if (f.given("--vocab")) cfg.task.vocab_size = f.vocab;
  if (f.given("--order")) cfg.task.order = f.order;
  if (f.given("--perturbation")) cfg.task.perturbation = f.perturbation;
  if (f.given("--utility")) cfg.task.utility.kind = utility_kind_from_string(f.utility);
  if (f.given("--contexts")) cfg.task.num_contexts = f.contexts;
  if (f.given("--max-len")) cfg.generation.max_len = f.max_len;
  if (f.given("--sample-cap")) cfg.label.sample_cap = f.sample_cap;
  if (f.given("--exact")) cfg.label.exact = f.exact;
  return cfg;
}

fs::path in_dir(const Flags& f) { return f.in.empty() ? fs::path(f.out) : fs::path(f.in); }

void ensure_out(const Flags& f) {
  std::error_code ec;
  fs::create_directories(f.out, ec);
  if (ec) throw Error("cannot create output directory " + f.out + ": " + ec.message());
}

struct Task {
  SyntheticTaskSpec spec;
  std::uint64_t seed = 0;  // master seed the bundle was made with
  std::string digest;
  SyntheticPair models;
  std::vector<TokenSeq> contexts;
  UtilityFn utility;
};

Task load_task(const fs::path& dir) {
  const JsonlFile file = read_jsonl(dir / "task.jsonl", "pad.task");
  if (file.rows.size() != 1) throw SchemaError("task.jsonl must hold exactly one spec record");
  Task t;
  t.spec = task_spec_from_json(file.rows[0]);
  t.digest = file.header.at("config_digest").get<std::string>();
  t.seed = file.header.at("seed").get<std::uint64_t>();
  t.models = make_synthetic_pair(t.spec);
  t.contexts = make_contexts(t.spec);
  t.utility = make_utility(t.spec.utility, t.spec.vocab_size);
  return t;
}

// Later stages use the persisted task and, unless a seed was given on the
// command line or in a config file, the task's master seed.
void adopt_task(RunConfig& cfg, const Task& task, const Flags& f) {
  if (!f.given("--seed") && f.config.empty()) cfg.seed = task.seed;
  cfg.task = task.spec;
  cfg.validate();
}

std::vector<Example> to_examples(const std::vector<LabeledSample>& samples) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back({s.features, s.label == PivotLabel::kPivot ? kPivotClass : kNonPivotClass});
  }
  return out;
}

struct Labels {
  std::vector<LabeledSample> samples;
  std::string digest;
};

Labels load_labels(const fs::path& dir) {
  const JsonlFile file = read_jsonl(dir / "labels.jsonl", "pad.labels");
  Labels l;
  l.digest = file.header.at("config_digest").get<std::string>();
  for (const Json& row : file.rows) l.samples.push_back(labeled_sample_from_json(row));
  return l;
}

struct Params {
  MlpParams params;
  JsonlFile file;
};

Params load_params(const fs::path& path) {
  Params p;
  p.file = read_jsonl(path, "pad.mlp");
  if (p.file.rows.size() != 1) throw SchemaError("mlp.jsonl must hold exactly one params record");
  p.params = mlp_params_from_json(p.file.rows[0]);
  return p;
}

fs::path params_path(const Flags& f) {
  return f.params.empty() ? in_dir(f) / "mlp.jsonl" : fs::path(f.params);
}

std::string file_tag(const DecoderSpec& d) {
  if (d.kind != DecoderKind::kPad) return d.id();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pad-%.2f", d.sigma);
  return buf;
}

// Scorer for PAD decoders plus its description for the config record.
struct ScorerChoice {
  std::shared_ptr<const PivotScorer> scorer;
  Json description;
};

ScorerChoice choose_scorer(const Flags& f, const RunConfig& cfg, const Task& task) {
  if (f.oracle) {
    PivotOracleConfig oc;
    oc.epsilon = cfg.oracle_epsilon;
    oc.n_rollouts = cfg.label.n_rollouts;
    oc.params = cfg.generation;
    return {std::make_shared<OracleScorer>(task.utility, oc, stage_seed(cfg, SeedTag::kOracle)),
            Json{{"kind", "oracle"}, {"epsilon", oc.epsilon}, {"rollouts", oc.n_rollouts}}};
  }
  const fs::path path = params_path(f);
  if (!fs::exists(path)) {
    throw ConfigError("pad decoder needs classifier params (" + path.string() +
                      " not found) or --oracle");
  }
  Params p = load_params(path);
  if (p.params.dims.d_h != task.spec.hidden_dim) {
    throw ConfigError("classifier d_h does not match the task's d_h");
  }
  return {std::make_shared<MlpScorer>(p.params),
          Json{{"kind", "mlp"}, {"params_digest", p.file.header.at("config_digest")}}};
}

RunSetup make_setup(const RunConfig& cfg, const Task& task, std::shared_ptr<const PivotScorer> scorer) {
  RunSetup s;
  s.target = task.models.target;
  s.draft = task.models.draft;
  s.utility = task.utility;
  s.params = cfg.generation;
  s.gamma = cfg.gamma;
  s.gate = cfg.gate;
  s.scorer = std::move(scorer);
  s.profile = cfg.profile;
  s.classifier_cost = cfg.classifier_cost;
  s.seed = stage_seed(cfg, SeedTag::kRun);
  s.jobs = cfg.jobs;
  return s;
}

void log_time(const char* stage, std::chrono::steady_clock::time_point start) {
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "padctl " << stage << ": " << ms << " ms wall\n";
}

int cmd_synth(const Flags& f) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = resolve(f);
  cfg.validate();
  ensure_out(f);
  const Json spec = to_json(cfg.task);
  const Json config{{"task", spec}};
  write_jsonl(fs::path(f.out) / "task.jsonl", make_header("pad.task", cfg.seed, config), {spec});
  std::cerr << "task: V=" << cfg.task.vocab_size << " k=" << cfg.task.order
            << " contexts=" << cfg.task.num_contexts << "\n";
  log_time("synth", start);
  return 0;
}

int cmd_label(const Flags& f) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = resolve(f);
  const Task task = load_task(in_dir(f));
  adopt_task(cfg, task, f);
  ensure_out(f);

  const auto judge = make_judge(cfg);
  const HarvestResult h = harvest_and_label(task.contexts, *task.models.target,
                                            *task.models.draft, task.utility, label_config(cfg), *judge);
  std::vector<Json> rows;
  rows.reserve(h.samples.size());
  std::size_t pivots = 0;
  for (const auto& s : h.samples) {
    rows.push_back(to_json(s));
    pivots += s.label == PivotLabel::kPivot;
  }
  const Json config{{"run", to_json(cfg)}, {"inputs", {{"task", task.digest}}}};
  const Json extra{{"num_samples", h.samples.size()},
                   {"pivots", pivots},
                   {"sd_rejections", h.sd_rejections},
                   {"sd_accepts", h.sd_accepts},
                   {"unlabeled_rejections", h.unlabeled_rejections},
                   {"judge_flips", h.judge_flips},
                   {"rollouts", h.rollouts},
                   {"truncated", h.truncated}};
  write_jsonl(fs::path(f.out) / "labels.jsonl", make_header("pad.labels", cfg.seed, config, extra),
              rows);
  std::cerr << "labels: " << h.samples.size() << " samples (" << pivots << " pivot), "
            << h.sd_rejections << " SD rejections, " << h.judge_flips << " judge flips"
            << (h.truncated ? ", truncated" : "") << "\n";
  log_time("label", start);
  return 0;
}

int cmd_train(const Flags& f) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = resolve(f);
  const Task task = load_task(in_dir(f));
  adopt_task(cfg, task, f);
  const Labels labels = load_labels(in_dir(f));
  ensure_out(f);

  const std::vector<Example> data = to_examples(labels.samples);
  const TrainConfig tc = train_config(cfg);
  const TrainResult r = train(data, tc);

  const Json config{{"run", to_json(cfg)}, {"inputs", {{"task", task.digest}, {"labels", labels.digest}}}};
  const Json split{{"split", tc.split}, {"seed", tc.seed}};
  const Json header = make_header("pad.mlp", cfg.seed, config, Json{{"train", split}});
  write_jsonl(fs::path(f.out) / "mlp.jsonl", header, {to_json(r.params)});

  std::vector<Json> epochs;
  for (const auto& e : r.report.epochs) {
    epochs.push_back(Json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  }
  write_jsonl(fs::path(f.out) / "train_report.jsonl",
              make_header("pad.train_report", cfg.seed, config, to_json(r.report)), epochs);
  std::cerr << "train: " << r.report.train_size << " train / " << r.report.val_size
            << " held out, best epoch " << r.report.best_epoch << " val loss "
            << r.report.best_val_loss << "\n";
  log_time("train", start);
  return 0;
}

int cmd_eval(const Flags& f) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = resolve(f);
  const Labels labels = load_labels(in_dir(f));
  const Params p = load_params(params_path(f));
  if (!f.given("--seed") && f.config.empty()) cfg.seed = p.file.header.at("seed").get<std::uint64_t>();
  const Json& inputs = p.file.header.at("config").at("inputs");
  if (inputs.at("labels") != labels.digest) {
    throw ConfigError("classifier params were trained on a different labels file");
  }
  ensure_out(f);

  const double fraction = p.file.header.at("train").at("split").get<double>();
  const std::uint64_t split_seed = p.file.header.at("train").at("seed").get<std::uint64_t>();
  const std::vector<Example> data = to_examples(labels.samples);
  const DataSplit split = train_split(data.size(), fraction, split_seed);
  std::vector<Example> test;
  for (std::size_t i : split.test) test.push_back(data[i]);
  const RocResult roc = roc_auc(p.params, test);
  const double se = auc_standard_error(roc.auc, roc.positives, roc.negatives);

  const Json config{{"inputs", {{"labels", labels.digest}, {"mlp", p.file.header.at("config_digest")}}}};
  const Json extra{{"auc", roc.auc},
                   {"auc_se", se},
                   {"positives", roc.positives},
                   {"negatives", roc.negatives}};
  const Json header = make_header("pad.roc", cfg.seed, config, extra);
  std::vector<Json> rows;
  for (const auto& pt : roc.points) {
    const Json thr = std::isinf(pt.threshold) ? Json(nullptr) : Json(pt.threshold);
    rows.push_back(Json{{"threshold", thr}, {"fpr", pt.fpr}, {"tpr", pt.tpr}});
  }
  write_jsonl(fs::path(f.out) / "roc.jsonl", header, rows);

  std::ofstream csv(fs::path(f.out) / "roc.csv", std::ios::binary | std::ios::trunc);
  if (!csv) throw Error("cannot write roc.csv");
  csv << "# " << header.dump() << "\n" << "threshold,fpr,tpr\n";
  for (const Json& r : rows) {
    csv << (r["threshold"].is_null() ? std::string("inf") : r["threshold"].dump()) << ","
        << r["fpr"].dump() << "," << r["tpr"].dump() << "\n";
  }
  std::printf("AUC %.4f +/- %.4f (%zu pivot, %zu non-pivot)\n", roc.auc, se, roc.positives,
              roc.negatives);
  log_time("eval", start);
  return 0;
}

int cmd_run(const Flags& f) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = resolve(f);
  const Task task = load_task(in_dir(f));
  adopt_task(cfg, task, f);

  DecoderSpec dec{decoder_kind_from_string(f.decoder), cfg.gate.sigma};
  ScorerChoice sc;
  if (dec.kind == DecoderKind::kPad) sc = choose_scorer(f, cfg, task);
  ensure_out(f);

  RunSetup setup = make_setup(cfg, task, sc.scorer);
  const RunResult r = simulate_run(dec, setup, task.contexts);

  const Json config{{"run", to_json(cfg)},
                    {"decoder", dec.id()},
                    {"scorer", sc.description},
                    {"inputs", {{"task", task.digest}}}};
  const std::string tag = file_tag(dec);
  write_jsonl(fs::path(f.out) / ("report-" + tag + ".jsonl"),
              make_header("pad.report", cfg.seed, config), {to_json(r.report)});
  std::vector<Json> audit;
  for (std::size_t c = 0; c < r.decodes.size(); ++c) {
    for (std::size_t b = 0; b < r.decodes[c].blocks.size(); ++b) {
      for (const auto& rec : r.decodes[c].blocks[b].records) audit.push_back(audit_record(c, b, rec));
    }
  }
  write_jsonl(fs::path(f.out) / ("audit-" + tag + ".jsonl"),
              make_header("pad.audit", cfg.seed, config), audit);
  std::printf("%s utility %.4f +/- %.4f", dec.id().c_str(), r.report.utility_mean, r.report.utility_ci);
  if (r.report.eta) std::printf(" eta %.4f", *r.report.eta);
  std::printf(" speedup %.3f\n", r.report.simulated_speedup);
  std::cerr << "padctl run: " << r.report.wall_clock_ms << " ms decoding\n";
  log_time("run", start);
  return 0;
}

int cmd_bench(const Flags& f) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = resolve(f);
  const Task task = load_task(in_dir(f));
  adopt_task(cfg, task, f);
  const ScorerChoice sc = choose_scorer(f, cfg, task);
  ensure_out(f);

  const RunSetup setup = make_setup(cfg, task, sc.scorer);
  std::vector<DecoderSpec> decoders{{DecoderKind::kTarget, 0.0}, {DecoderKind::kSd, 0.0}};
  for (double s : cfg.bench_sigmas) decoders.push_back({DecoderKind::kPad, s});
  decoders.push_back({DecoderKind::kDraft, 0.0});
  std::vector<RunReport> reports;
  for (const auto& d : decoders) reports.push_back(simulate_run(d, setup, task.contexts).report);
  const Comparison cmp = compare_report(reports);

  const Json config{{"run", to_json(cfg)}, {"scorer", sc.description}, {"inputs", {{"task", task.digest}}}};
  const Json header = make_header("pad.bench", cfg.seed, config);
  std::vector<Json> rows;
  for (const auto& line : cmp.lines) rows.push_back(Json::parse(line));
  write_jsonl(fs::path(f.out) / "bench.jsonl", header, rows);
  std::ofstream txt(fs::path(f.out) / "bench.txt", std::ios::binary | std::ios::trunc);
  if (!txt) throw Error("cannot write bench.txt");
  txt << cmp.table;
  std::cout << cmp.table;
  log_time("bench", start);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"padctl: pivot-aware speculative decoding on synthetic tasks"};
  app.require_subcommand(1);
  Flags f;
  f.app = nullptr;

  auto* synth = app.add_subcommand("synth", "write a synthetic task bundle");
  auto* label = app.add_subcommand("label", "harvest and label pivot candidates");
  auto* trainc = app.add_subcommand("train", "train the pivot classifier");
  auto* evalc = app.add_subcommand("eval", "ROC/AUC of the classifier on the held-out split");
  auto* run = app.add_subcommand("run", "decode every context with one decoder");
  auto* bench = app.add_subcommand("bench", "compare target, SD, PAD and draft decoders");
  for (auto* sub : {synth, label, trainc, evalc, run, bench}) add_common(sub, f);

  synth->add_option("--vocab", f.vocab, "vocabulary size");
  synth->add_option("--order", f.order, "context order k");
  synth->add_option("--perturbation", f.perturbation, "draft mixing strength");
  synth->add_option("--utility", f.utility, "substring | checksum");
  synth->add_option("--contexts", f.contexts, "number of prompts");

  for (auto* sub : {label, run, bench}) {
    sub->add_option("--max-len", f.max_len, "generation horizon");
    sub->add_option("--rollouts", f.rollouts, "rollouts per utility estimate");
  }
  label->add_option("--alpha", f.alpha, "labeling tolerance");
  label->add_option("--sample-cap", f.sample_cap, "labeled samples per context");
  label->add_flag("--exact", f.exact, "exact utilities when enumerable");

  for (auto* sub : {run, bench}) {
    sub->add_option("--gamma", f.gamma, "speculative length");
    sub->add_option("--profile", f.profile, "t_draft,t_target");
    sub->add_option("--prob-floor", f.prob_floor, "override floor on target probability");
    sub->add_flag("--oracle", f.oracle, "score with the exact pivot oracle");
  }
  for (auto* sub : {evalc, run, bench}) sub->add_option("--params", f.params, "classifier params file");
  run->add_option("--decoder", f.decoder, "target | draft | sd | pad")
      ->check(CLI::IsMember({"target", "draft", "sd", "pad"}));
  run->add_option("--sigma", f.sigma, "override threshold");
  bench->add_option("--sigmas", f.sigmas, "PAD thresholds to compare");

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto* sub : app.get_subcommands()) f.app = sub;
    if (f.app == synth) return cmd_synth(f);
    if (f.app == label) return cmd_label(f);
    if (f.app == trainc) return cmd_train(f);
    if (f.app == evalc) return cmd_eval(f);
    if (f.app == run) return cmd_run(f);
    if (f.app == bench) return cmd_bench(f);
  } catch (const std::exception& e) {
    std::cerr << "padctl: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
