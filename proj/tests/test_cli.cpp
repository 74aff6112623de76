#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct Run {
  int rc = -1;
  std::string out;
};

// Runs the CLI with stderr discarded; relative paths resolve in the test data directory.
Run vgent(const std::string& args) {
  const std::string cmd = "VGENT_DATA_DIR=" VGENT_TEST_DATA " " VGENT_BINARY " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path data(const std::string& name) { return fs::path(VGENT_TEST_DATA) / name; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vgent_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string tmp(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, RewardMatchesGolden) {
  const auto r = vgent("reward --gt reward_gt.jsonl --pred reward_pred.jsonl --out " + tmp("r.jsonl"));
  EXPECT_EQ(r.rc, 0);
  EXPECT_EQ(slurp(tmp("r.jsonl")), slurp(data("reward_expected.jsonl")));
}

TEST_F(Cli, RewardOnEmptyInputSucceeds) {
  std::ofstream(tmp("empty_gt.jsonl"));
  std::ofstream(tmp("empty_pred.jsonl"));
  const auto r = vgent("reward --gt " + tmp("empty_gt.jsonl") + " --pred " + tmp("empty_pred.jsonl"));
  EXPECT_EQ(r.rc, 0);
  EXPECT_EQ(r.out, "");
}

TEST_F(Cli, RewardReportsMalformedLine) {
  const auto r = vgent("reward --gt reward_gt.jsonl --pred reward_pred_bad.jsonl");
  EXPECT_EQ(r.rc, 1);
  EXPECT_NE(r.out.find("{\"line\":2,"), std::string::npos);
  // Good records are still scored.
  EXPECT_NE(r.out.find("\"id\":\"a\""), std::string::npos);
}

TEST_F(Cli, MissingInputIsAnInputError) {
  EXPECT_EQ(vgent("reward --gt nowhere.jsonl --pred reward_pred.jsonl").rc, 2);
}

TEST_F(Cli, LabelMatchesGolden) {
  const auto r = vgent("label --scenes decoration_scenes.jsonl --proposals decoration_proposals.jsonl");
  EXPECT_EQ(r.rc, 0);
  EXPECT_EQ(r.out, slurp(data("decoration_labels_expected.jsonl")));
}

TEST_F(Cli, EvalOfPerfectPredictionsIsOne) {
  const auto r =
      vgent("eval --scenes small_scenes.jsonl --predictions small_perfect_predictions.jsonl --format json");
  ASSERT_EQ(r.rc, 0);
  const auto j = nlohmann::json::parse(r.out);
  const auto& all = j["splits"]["overall"];
  EXPECT_EQ(all["samples"], 6);
  for (const char* k : {"f1", "precision", "recall", "macro_f1", "giou", "ciou"}) EXPECT_EQ(all[k], 1.0) << k;
}

TEST_F(Cli, OracleModesOnDecorationFixture) {
  const auto f1 = vgent("oracle --scenes decoration_scenes.jsonl --proposals decoration_proposals.jsonl --mode f1 --report " +
                        tmp("f1.json") + " --format json");
  const auto mask = vgent("oracle --scenes decoration_scenes.jsonl --proposals decoration_proposals.jsonl --mode mask --report " +
                          tmp("mask.json") + " --format json");
  ASSERT_EQ(f1.rc, 0);
  ASSERT_EQ(mask.rc, 0);
  const auto a = nlohmann::json::parse(f1.out), b = nlohmann::json::parse(mask.out);
  EXPECT_EQ(a["instances"].size(), 1u);
  EXPECT_EQ(b["instances"].size(), 2u);
  const auto ra = nlohmann::json::parse(slurp(tmp("f1.json"))), rb = nlohmann::json::parse(slurp(tmp("mask.json")));
  EXPECT_LT(ra["splits"]["overall"]["ciou"].get<double>(), rb["splits"]["overall"]["ciou"].get<double>());
}

TEST_F(Cli, GenIsSeedDeterministic) {
  for (const char* run : {"a", "b"})
    ASSERT_EQ(vgent(std::string("--seed 9 gen --num-scenes 5 --scenes-out ") + tmp(std::string(run) + "_s.jsonl") +
                    " --proposals-out " + tmp(std::string(run) + "_p.jsonl"))
                  .rc,
              0);
  EXPECT_EQ(slurp(tmp("a_s.jsonl")), slurp(tmp("b_s.jsonl")));
  EXPECT_EQ(slurp(tmp("a_p.jsonl")), slurp(tmp("b_p.jsonl")));
  EXPECT_FALSE(slurp(tmp("a_s.jsonl")).empty());
}

TEST_F(Cli, MergeNeedsInputs) {
  EXPECT_EQ(vgent("merge").rc, 2);
  const auto r = vgent("merge decoration_proposals.jsonl decoration_proposals.jsonl");
  ASSERT_EQ(r.rc, 0);
  // One line per detector group.
  std::istringstream lines(r.out);
  std::size_t n = 0;
  for (std::string line; std::getline(lines, line);) n += nlohmann::json::parse(line)["proposals"].size();
  EXPECT_EQ(n, 6u);
}

TEST_F(Cli, ConvertRefLeavesNoTokens) {
  ASSERT_EQ(vgent("gen --num-scenes 20 --scenes-out " + tmp("s.jsonl") + " --proposals-out " + tmp("p.jsonl")).rc,
            0);
  const auto r = vgent("convert-ref --scenes " + tmp("s.jsonl"));
  EXPECT_EQ(r.rc, 0);
  EXPECT_EQ(r.out.find("<mask-ref>"), std::string::npos);
}

TEST_F(Cli, TrainSelectGradcheckSmoke) {
  const auto ckpt = tmp("sel.ckpt");
  const auto t = vgent("train --num-train 16 --num-heldout 4 --epochs 1 --warmup 1 --checkpoint " + ckpt);
  ASSERT_EQ(t.rc, 0);
  EXPECT_NE(t.out.find("training log checksum"), std::string::npos);
  const auto s = vgent("select --checkpoint " + ckpt + " --scenes small_scenes.jsonl --proposals small_proposals.jsonl");
  EXPECT_EQ(s.rc, 0);
  EXPECT_NE(s.out.find("syn-5-00005"), std::string::npos);
  EXPECT_EQ(vgent("gradcheck --checkpoint " + ckpt + " --coordinates 32").rc, 0);
  std::ofstream(tmp("broken.ckpt")) << "VGENTSEL garbage";
  EXPECT_EQ(vgent("select --checkpoint " + tmp("broken.ckpt") +
                  " --scenes small_scenes.jsonl --proposals small_proposals.jsonl")
                .rc,
            2);
}

}  // namespace
