// SPDX-License-Identifier: Apache-2.0

#include "pad/io.h"

#include <cstdio>
#include <fstream>

#include "pad/errors.h"

namespace pad {

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_digest(const Json& config) { return fnv1a_hex(config.dump()); }

Json make_header(const std::string& schema, std::uint64_t seed, const Json& config,
                 const Json& extra) {
  Json h;
  h["schema"] = schema;
  h["version"] = kSchemaVersion;
  h["seed"] = seed;
  h["config_digest"] = config_digest(config);
  h["config"] = config;
  for (const auto& [k, v] : extra.items()) h[k] = v;
  return h;
}

void write_jsonl(const std::filesystem::path& path, const Json& header,
                 const std::vector<Json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << header.dump() << '\n';
  for (const Json& r : rows) out << r.dump() << '\n';
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

JsonlFile read_jsonl(const std::filesystem::path& path, const std::string& expected_schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  JsonlFile f;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty file");
  try {
    f.header = Json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": bad header: " + e.what());
  }
  if (!f.header.is_object() || !f.header.contains("schema") || !f.header.contains("version")) {
    throw SchemaError(path.string() + ": header lacks schema/version");
  }
  if (f.header["schema"] != expected_schema) {
    throw SchemaError(path.string() + ": expected schema '" + expected_schema + "', found " +
                      f.header["schema"].dump());
  }
  if (f.header["version"] != kSchemaVersion) {
    throw SchemaError(path.string() + ": schema version " + f.header["version"].dump() +
                      " not supported (want " + std::to_string(kSchemaVersion) + ")");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      f.rows.push_back(Json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return f;
}

namespace {

// Wraps nlohmann lookups so a missing or mistyped field surfaces as a
// SchemaError naming the field.
template <typename T>
T field(const Json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("field '") + name + "': " + e.what());
  }
}

template <typename T>
T field_or(const Json& j, const char* name, T fallback) {
  return j.contains(name) ? field<T>(j, name) : fallback;
}

Json linear_json(const Linear& l) {
  Json j;
  j["in"] = l.in;
  j["out"] = l.out;
  j["w"] = l.w;
  j["b"] = l.b;
  return j;
}

Linear linear_from_json(const Json& j, int in, int out) {
  Linear l(in, out);
  if (field<int>(j, "in") != in || field<int>(j, "out") != out) {
    throw SchemaError("layer shape does not match dims");
  }
  l.w = field<std::vector<double>>(j, "w");
  l.b = field<std::vector<double>>(j, "b");
  if (l.w.size() != static_cast<std::size_t>(in) * out || l.b.size() != static_cast<std::size_t>(out)) {
    throw SchemaError("layer parameter count does not match shape");
  }
  return l;
}

}  // namespace

Json to_json(const GenerationParams& p) {
  Json j;
  j["temperature"] = p.temperature;
  j["top_p"] = p.top_p;
  j["top_k"] = p.top_k ? Json(*p.top_k) : Json(nullptr);
  j["max_len"] = p.max_len;
  j["seed"] = p.seed;
  return j;
}

GenerationParams generation_params_from_json(const Json& j) {
  GenerationParams p;
  p.temperature = field_or(j, "temperature", p.temperature);
  p.top_p = field_or(j, "top_p", p.top_p);
  if (j.contains("top_k") && !j["top_k"].is_null()) p.top_k = field<int>(j, "top_k");
  p.max_len = field_or(j, "max_len", p.max_len);
  p.seed = field_or(j, "seed", p.seed);
  p.validate();
  return p;
}

Json to_json(const SyntheticTaskSpec& spec) {
  Json j;
  j["vocab_size"] = spec.vocab_size;
  j["order"] = spec.order;
  j["seed"] = spec.seed;
  j["perturbation"] = spec.perturbation;
  j["d_h"] = spec.hidden_dim;
  j["eos_scale"] = spec.eos_scale;
  j["utility"] = to_string(spec.utility.kind);
  j["pattern"] = spec.utility.pattern;
  j["num_contexts"] = spec.num_contexts;
  j["context_len"] = spec.context_len;
  return j;
}

SyntheticTaskSpec task_spec_from_json(const Json& j) {
  SyntheticTaskSpec s;
  s.vocab_size = field_or(j, "vocab_size", s.vocab_size);
  s.order = field_or(j, "order", s.order);
  s.seed = field_or(j, "seed", s.seed);
  s.perturbation = field_or(j, "perturbation", s.perturbation);
  s.hidden_dim = field_or(j, "d_h", s.hidden_dim);
  s.eos_scale = field_or(j, "eos_scale", s.eos_scale);
  if (j.contains("utility")) s.utility.kind = utility_kind_from_string(field<std::string>(j, "utility"));
  s.utility.pattern = field_or(j, "pattern", s.utility.pattern);
  s.num_contexts = field_or(j, "num_contexts", s.num_contexts);
  s.context_len = field_or(j, "context_len", s.context_len);
  s.validate();
  return s;
}

Json to_json(const LabeledSample& s) {
  Json j;
  j["context_id"] = s.context_id;
  j["prefix_len"] = s.prefix.size();
  j["prefix_tokens"] = s.prefix;
  j["candidate"] = s.candidate;
  j["u_base_hat"] = s.u_base_hat;
  j["u_cand_hat"] = s.u_cand_hat;
  j["label"] = to_string(s.label);
  j["judge_flipped"] = s.judge_flipped;
  Json f;
  f["h"] = s.features.h;
  f["entropy"] = s.features.entropy;
  f["p_cand"] = s.features.p_cand;
  j["feature_vector"] = f;
  return j;
}

LabeledSample labeled_sample_from_json(const Json& j) {
  LabeledSample s;
  s.context_id = field<int>(j, "context_id");
  s.prefix = field<TokenSeq>(j, "prefix_tokens");
  if (field<std::size_t>(j, "prefix_len") != s.prefix.size()) {
    throw SchemaError("prefix_len does not match prefix_tokens");
  }
  s.candidate = field<TokenId>(j, "candidate");
  s.u_base_hat = field<double>(j, "u_base_hat");
  s.u_cand_hat = field<double>(j, "u_cand_hat");
  s.label = pivot_label_from_string(field<std::string>(j, "label"));
  s.judge_flipped = field<bool>(j, "judge_flipped");
  const Json& f = j.at("feature_vector");
  s.features.h = field<std::vector<double>>(f, "h");
  s.features.entropy = field<double>(f, "entropy");
  s.features.p_cand = field<double>(f, "p_cand");
  return s;
}

Json to_json(const MlpParams& p) {
  Json j;
  j["dims"] = {{"d_h", p.dims.d_h}, {"d_u", p.dims.d_u}, {"d_v", p.dims.d_v}, {"d_f", p.dims.d_f}};
  j["hidden"] = linear_json(p.hidden);
  j["scalar"] = linear_json(p.scalar);
  j["fuse"] = linear_json(p.fuse);
  j["out"] = linear_json(p.out);
  return j;
}

MlpParams mlp_params_from_json(const Json& j) {
  const Json& d = j.at("dims");
  MlpDims dims{field<int>(d, "d_h"), field<int>(d, "d_u"), field<int>(d, "d_v"),
               field<int>(d, "d_f")};
  MlpParams p(dims);
  p.hidden = linear_from_json(j.at("hidden"), dims.d_h, dims.d_u);
  p.scalar = linear_from_json(j.at("scalar"), 2, dims.d_v);
  p.fuse = linear_from_json(j.at("fuse"), dims.d_u + dims.d_v, dims.d_f);
  p.out = linear_from_json(j.at("out"), dims.d_f, 2);
  return p;
}

Json to_json(const TrainReport& r) {
  Json j;
  j["best_epoch"] = r.best_epoch;
  j["best_val_loss"] = r.best_val_loss;
  j["class_weights"] = {{"non_pivot", r.class_weights.non_pivot}, {"pivot", r.class_weights.pivot}};
  j["train_size"] = r.train_size;
  j["val_size"] = r.val_size;
  j["train_pivots"] = r.train_pivots;
  j["val_pivots"] = r.val_pivots;
  return j;
}

Json to_json(const RunReport& r) {
  Json j;
  j["decoder"] = r.decoder_id;
  j["kind"] = to_string(r.kind);
  j["sigma"] = r.sigma;
  j["contexts"] = r.contexts;
  j["utility"] = r.utility_mean;
  j["utility_se"] = r.utility_se;
  j["utility_ci"] = r.utility_ci;
  j["eta"] = r.eta ? Json(*r.eta) : Json(nullptr);
  j["tau"] = r.tau ? Json(*r.tau) : Json(nullptr);
  j["tokens"] = r.tokens;
  j["blocks"] = r.blocks;
  j["proposed"] = r.proposed;
  j["accepted"] = r.accepted;
  j["rejections"] = r.rejections;
  j["overrides"] = r.overrides;
  j["score_queries"] = r.score_queries;
  j["simulated_cost"] = r.simulated_cost;
  j["simulated_speedup"] = r.simulated_speedup;
  j["predicted_speedup"] = r.predicted_speedup;
  return j;
}

Json audit_record(std::size_t context_id, std::size_t block, const PositionRecord& rec) {
  Json j;
  j["context_id"] = context_id;
  j["block"] = block;
  j["position"] = rec.position;
  j["draft_token"] = rec.draft_token;
  j["p_target"] = rec.p_target;
  j["p_draft"] = rec.p_draft;
  j["coin"] = rec.coin;
  j["decision"] = to_string(rec.decision);
  j["source"] = to_string(rec.source);
  return j;
}

}  // namespace pad
