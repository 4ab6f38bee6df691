// SPDX-License-Identifier: Apache-2.0
//
// End-to-end tests that drive the padctl binary.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "pad/io.h"

using namespace pad;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string body(const fs::path& p) {
  const std::string s = slurp(p);
  return s.substr(s.find('\n') + 1);
}

class Cli : public testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pad_cli_" + std::string(testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  // Runs padctl; stdout and stderr land in files inside the test directory.
  int padctl(const std::string& args) {
    const std::string cmd = std::string(PADCTL_PATH) + " " + args + " --out " + dir_.string() +
                            " > " + (dir_ / "stdout.txt").string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  std::string err() const { return slurp(dir_ / "stderr.txt"); }
  std::string out() const { return slurp(dir_ / "stdout.txt"); }

  // Small, fast task for the chain tests.
  void synth_small(const std::string& extra = "") {
    ASSERT_EQ(padctl("synth --seed 3 --vocab 5 --contexts 300 --utility substring " + extra), 0) << err();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SynthRejectsSingletonVocabulary) {
  EXPECT_NE(padctl("synth --vocab 1"), 0);
  EXPECT_NE(err().find("vocab_size must be >= 2"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "task.jsonl"));
}

TEST_F(Cli, SynthSpecRoundTripIsByteIdentical) {
  synth_small();
  const JsonlFile f = read_jsonl(dir_ / "task.jsonl", "pad.task");
  const fs::path again = dir_ / "again.jsonl";
  write_jsonl(again, f.header, {to_json(task_spec_from_json(f.rows.at(0)))});
  EXPECT_EQ(slurp(again), slurp(dir_ / "task.jsonl"));
}

TEST_F(Cli, SeedChangesModelTables) {
  synth_small();
  const auto a = task_spec_from_json(read_jsonl(dir_ / "task.jsonl", "pad.task").rows.at(0));
  ASSERT_EQ(padctl("synth --seed 4 --vocab 5 --contexts 300 --utility substring"), 0);
  const auto b = task_spec_from_json(read_jsonl(dir_ / "task.jsonl", "pad.task").rows.at(0));
  const SyntheticPair pa = make_synthetic_pair(a), pb = make_synthetic_pair(b);
  bool differ = false;
  for (std::size_t r = 0; r < pa.target->num_rows(); ++r) differ |= !(pa.target->row(r) == pb.target->row(r));
  EXPECT_TRUE(differ);
}

TEST_F(Cli, PadNeedsClassifierOrOracle) {
  synth_small();
  EXPECT_NE(padctl("run --decoder pad"), 0);
  EXPECT_NE(err().find("--oracle"), std::string::npos);
  EXPECT_EQ(padctl("run --decoder pad --oracle --max-len 12"), 0) << err();
}

TEST_F(Cli, SdAndTargetUtilitiesAgreeWithinInterval) {
  synth_small();
  ASSERT_EQ(padctl("run --decoder sd"), 0) << err();
  ASSERT_EQ(padctl("run --decoder target"), 0) << err();
  const Json sd = read_jsonl(dir_ / "report-sd.jsonl", "pad.report").rows.at(0);
  const Json tg = read_jsonl(dir_ / "report-target.jsonl", "pad.report").rows.at(0);
  const double gap = std::fabs(sd["utility"].get<double>() - tg["utility"].get<double>());
  const double se = std::hypot(sd["utility_se"].get<double>(), tg["utility_se"].get<double>());
  EXPECT_LE(gap, 3.0 * se + 1e-12);
  EXPECT_TRUE(tg["eta"].is_null());
  EXPECT_GT(sd["eta"].get<double>(), 0.0);
}

TEST_F(Cli, PadAtSigmaZeroMatchesSdByteForByte) {
  synth_small();
  ASSERT_EQ(padctl("run --decoder sd"), 0) << err();
  ASSERT_EQ(padctl("run --decoder pad --oracle --sigma 0"), 0) << err();
  EXPECT_EQ(body(dir_ / "audit-sd.jsonl"), body(dir_ / "audit-pad-0.00.jsonl"));
  const Json sd = read_jsonl(dir_ / "report-sd.jsonl", "pad.report").rows.at(0);
  const Json pad = read_jsonl(dir_ / "report-pad-0.00.jsonl", "pad.report").rows.at(0);
  for (const char* k : {"utility", "eta", "tokens", "accepted", "proposed", "simulated_cost"}) {
    EXPECT_EQ(sd[k], pad[k]) << k;
  }
}

TEST_F(Cli, ReportAndAuditFollowSchema) {
  synth_small();
  ASSERT_EQ(padctl("run --decoder pad --oracle --sigma 0.7 --max-len 12"), 0) << err();
  const JsonlFile rep = read_jsonl(dir_ / "report-pad-0.70.jsonl", "pad.report");
  ASSERT_EQ(rep.rows.size(), 1u);
  for (const char* k : {"decoder", "utility", "utility_ci", "eta", "tau", "simulated_speedup",
                        "predicted_speedup", "overrides"}) {
    EXPECT_TRUE(rep.rows[0].contains(k)) << k;
  }
  EXPECT_EQ(rep.header["config_digest"], config_digest(rep.header["config"]));
  const JsonlFile audit = read_jsonl(dir_ / "audit-pad-0.70.jsonl", "pad.audit");
  ASSERT_FALSE(audit.rows.empty());
  std::size_t overrides = 0;
  for (const Json& r : audit.rows) {
    if (r["source"] != "pad-override") continue;
    ++overrides;
    EXPECT_GE(r["p_target"].get<double>(), 1e-4);
  }
  EXPECT_EQ(overrides, rep.rows[0]["overrides"].get<std::size_t>());
}

TEST_F(Cli, LabelRowsEqualLoggedRejections) {
  synth_small();
  ASSERT_EQ(padctl("label --rollouts 4"), 0) << err();
  const JsonlFile f = read_jsonl(dir_ / "labels.jsonl", "pad.labels");
  EXPECT_GT(f.rows.size(), 0u);
  EXPECT_EQ(f.rows.size(), f.header["sd_rejections"].get<std::size_t>());
  EXPECT_EQ(f.rows.size(), f.header["num_samples"].get<std::size_t>());
  EXPECT_NE(err().find(std::to_string(f.rows.size()) + " SD rejections"), std::string::npos);
}

TEST_F(Cli, FullChainIsReproducibleAndLeavesInputsUntouched) {
  synth_small();
  ASSERT_EQ(padctl("label --rollouts 4"), 0) << err();
  const std::string labels = slurp(dir_ / "labels.jsonl");
  const std::string task = slurp(dir_ / "task.jsonl");
  ASSERT_EQ(padctl("train"), 0) << err();
  const std::string mlp = slurp(dir_ / "mlp.jsonl");
  ASSERT_EQ(padctl("train"), 0) << err();
  EXPECT_EQ(slurp(dir_ / "mlp.jsonl"), mlp);
  ASSERT_EQ(padctl("eval"), 0) << err();
  EXPECT_NE(out().find("AUC"), std::string::npos);
  const std::string csv = slurp(dir_ / "roc.csv");
  EXPECT_EQ(csv.rfind("# ", 0), 0u);
  EXPECT_NE(csv.find("threshold,fpr,tpr"), std::string::npos);
  ASSERT_EQ(padctl("bench --profile 1,3.94"), 0) << err();
  const JsonlFile bench = read_jsonl(dir_ / "bench.jsonl", "pad.bench");
  ASSERT_EQ(bench.rows.size(), 6u);
  EXPECT_EQ(bench.rows.front()["decoder"], "target");
  EXPECT_EQ(bench.rows.back()["decoder"], "draft");
  EXPECT_EQ(bench.rows.back()["simulated_speedup"].get<double>(), 3.94);
  EXPECT_NE(out().find("pad(0.50)"), std::string::npos);
  EXPECT_EQ(slurp(dir_ / "labels.jsonl"), labels);
  EXPECT_EQ(slurp(dir_ / "task.jsonl"), task);
}

TEST_F(Cli, SchemaMismatchIsRejected) {
  synth_small();
  ASSERT_EQ(padctl("label --rollouts 4"), 0) << err();
  std::string s = slurp(dir_ / "labels.jsonl");
  const auto pos = s.find("\"version\":1");
  ASSERT_NE(pos, std::string::npos);
  s.replace(pos, 11, "\"version\":9");
  std::ofstream(dir_ / "labels.jsonl", std::ios::binary) << s;
  EXPECT_NE(padctl("train"), 0);
  EXPECT_NE(err().find("schema version"), std::string::npos);
}

TEST_F(Cli, EvalRefusesParamsFromAnotherDataset) {
  synth_small();
  ASSERT_EQ(padctl("label --rollouts 4"), 0) << err();
  ASSERT_EQ(padctl("train"), 0) << err();
  ASSERT_EQ(padctl("label --rollouts 4 --alpha 0.5"), 0) << err();
  EXPECT_NE(padctl("eval"), 0);
  EXPECT_NE(err().find("different labels"), std::string::npos);
}

TEST_F(Cli, JobsDoNotChangeOutputs) {
  synth_small();
  ASSERT_EQ(padctl("label --rollouts 4 --jobs 1"), 0) << err();
  const std::string one = slurp(dir_ / "labels.jsonl");
  ASSERT_EQ(padctl("label --rollouts 4 --jobs 3"), 0) << err();
  EXPECT_EQ(slurp(dir_ / "labels.jsonl"), one);
}

TEST_F(Cli, BadProfileIsRejected) {
  synth_small();
  EXPECT_NE(padctl("run --decoder sd --profile 3"), 0);
  EXPECT_NE(err().find("t_draft,t_target"), std::string::npos);
}
