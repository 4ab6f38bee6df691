// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "pad/errors.h"
#include "pad/io.h"
#include "pad/run_config.h"

using namespace pad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pad_test_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Digest, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  const Json a = {{"x", 1}, {"y", 2}};
  const Json b = {{"x", 1}, {"y", 3}};
  EXPECT_NE(config_digest(a), config_digest(b));
  EXPECT_EQ(config_digest(a), config_digest(Json{{"x", 1}, {"y", 2}}));
}

TEST(Jsonl, HeaderAndRowsRoundTrip) {
  const Json cfg = {{"k", "v"}};
  const Json header = make_header("pad.test", 42, cfg, Json{{"count", 2}});
  EXPECT_EQ(header["schema"], "pad.test");
  EXPECT_EQ(header["version"], kSchemaVersion);
  EXPECT_EQ(header["seed"], 42u);
  EXPECT_EQ(header["config_digest"], config_digest(cfg));
  EXPECT_EQ(header["count"], 2);
  const fs::path p = scratch("roundtrip.jsonl");
  write_jsonl(p, header, {Json{{"a", 1}}, Json{{"a", 2}}});
  const JsonlFile f = read_jsonl(p, "pad.test");
  EXPECT_EQ(f.header, header);
  ASSERT_EQ(f.rows.size(), 2u);
  EXPECT_EQ(f.rows[1]["a"], 2);
}

TEST(Jsonl, SchemaChecks) {
  const fs::path p = scratch("schema.jsonl");
  write_jsonl(p, make_header("pad.labels", 1, Json::object()), {});
  EXPECT_THROW(read_jsonl(p, "pad.mlp"), SchemaError);
  Json h = make_header("pad.labels", 1, Json::object());
  h["version"] = kSchemaVersion + 1;
  write_jsonl(p, h, {});
  EXPECT_THROW(read_jsonl(p, "pad.labels"), SchemaError);
  std::ofstream(p) << "not json\n";
  EXPECT_THROW(read_jsonl(p, "pad.labels"), SchemaError);
  EXPECT_THROW(read_jsonl(scratch("missing.jsonl"), "pad.labels"), Error);
  EXPECT_THROW(write_jsonl(fs::path("/nonexistent/dir/x.jsonl"), h, {}), Error);
}

TEST(Records, TaskSpecRoundTrip) {
  SyntheticTaskSpec s;
  s.vocab_size = 7;
  s.order = 2;
  s.seed = 99;
  s.utility.kind = UtilityKind::kSubstring;
  s.utility.pattern = {4, 5};
  const Json j = to_json(s);
  EXPECT_EQ(to_json(task_spec_from_json(j)).dump(), j.dump());
  Json bad = j;
  bad["vocab_size"] = 1;
  EXPECT_THROW(task_spec_from_json(bad), ConfigError);
  bad = j;
  bad["order"] = "two";
  EXPECT_THROW(task_spec_from_json(bad), SchemaError);
}

TEST(Records, LabeledSampleFieldOrderAndRoundTrip) {
  LabeledSample s;
  s.context_id = 3;
  s.prefix = {1, 2};
  s.candidate = 4;
  s.label = PivotLabel::kPivot;
  s.u_base_hat = 0.5;
  s.u_cand_hat = 0.125;
  s.features.h = {0.1, -0.2};
  s.features.entropy = 1.25;
  s.features.p_cand = 0.03;
  s.judge_flipped = true;
  const Json j = to_json(s);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"context_id", "prefix_len", "prefix_tokens", "candidate",
                                            "u_base_hat", "u_cand_hat", "label", "judge_flipped",
                                            "feature_vector"}));
  EXPECT_EQ(labeled_sample_from_json(j), s);
  Json bad = j;
  bad["prefix_len"] = 5;
  EXPECT_THROW(labeled_sample_from_json(bad), SchemaError);
}

TEST(Records, MlpParamsRoundTripExactly) {
  const MlpParams p = MlpParams::init({5, 4, 3, 6}, 12);
  const Json j = Json::parse(to_json(p).dump());
  EXPECT_EQ(mlp_params_from_json(j), p);
  Json bad = j;
  bad["out"]["b"] = {0.0};
  EXPECT_THROW(mlp_params_from_json(bad), SchemaError);
}

TEST(Records, AuditRecordFields) {
  const PositionRecord r{2, 5, 0.01, 0.2, 0.7, Decision::kAccept, DecisionSource::kPadOverride};
  const Json j = audit_record(4, 1, r);
  EXPECT_EQ(j["context_id"], 4);
  EXPECT_EQ(j["block"], 1);
  EXPECT_EQ(j["source"], "pad-override");
  EXPECT_EQ(j["decision"], "accept");
  EXPECT_EQ(j["p_target"], 0.01);
}

TEST(RunConfig, DefaultsOverridesAndValidation) {
  const RunConfig d = run_config_from_json(Json::object());
  EXPECT_EQ(d.gamma, 10);
  EXPECT_EQ(d.label.alpha, 0.8);
  EXPECT_EQ(d.gate.prob_floor, 1e-4);
  EXPECT_EQ(d.task.seed, stage_seed(d, SeedTag::kTask));
  EXPECT_NO_THROW(d.validate());

  const RunConfig c = run_config_from_json(
      Json::parse(R"({"seed": 5, "gamma": 4, "task": {"vocab_size": 3}, "label": {"sample_cap": 2}})"));
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.gamma, 4);
  EXPECT_EQ(c.task.vocab_size, 3);
  EXPECT_EQ(c.label.sample_cap, 2);
  EXPECT_EQ(label_config(c).seed, stage_seed(c, SeedTag::kLabel));
  EXPECT_NE(stage_seed(c, SeedTag::kLabel), stage_seed(c, SeedTag::kTrain));

  // Serialized config reloads to the same serialization.
  EXPECT_EQ(to_json(run_config_from_json(to_json(c))).dump(), to_json(c).dump());
  EXPECT_FALSE(to_json(c).contains("jobs"));

  EXPECT_THROW(run_config_from_json(Json::parse(R"({"gamma": "ten"})")), ConfigError);
  EXPECT_THROW(run_config_from_json(Json::parse(R"({"task": {"vocab_size": 1}})")), ConfigError);
  RunConfig bad = d;
  bad.label.judge = "gemini";
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(RunConfig, ProfileParsing) {
  const TimingProfile p = parse_profile("1,3.94");
  EXPECT_EQ(p.t_draft, 1.0);
  EXPECT_EQ(p.t_target, 3.94);
  EXPECT_THROW(parse_profile("1;3"), ConfigError);
  EXPECT_THROW(parse_profile("1,x"), ConfigError);
  EXPECT_THROW(parse_profile("0,3"), ConfigError);
}

TEST(RunConfig, JudgeSelection) {
  RunConfig c = run_config_from_json(Json::object());
  c.task.utility.kind = UtilityKind::kChecksum;
  EXPECT_NE(dynamic_cast<ChecksumRepairJudge*>(make_judge(c).get()), nullptr);
  c.task.utility.kind = UtilityKind::kSubstring;
  EXPECT_NE(dynamic_cast<AlwaysSoundJudge*>(make_judge(c).get()), nullptr);
  c.label.judge = "checksum-repair";
  EXPECT_NE(dynamic_cast<ChecksumRepairJudge*>(make_judge(c).get()), nullptr);
}
