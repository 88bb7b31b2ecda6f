#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "treestealer/eval.hpp"
#include "treestealer/tree_io.hpp"

using namespace treestealer;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "treestealer");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("treestealer_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, Pipeline) {
  auto r = invoke({"gen-tree", "--features", "3", "--depth", "3:5", "--range", "0:16", "--grid", "0.5",
                "--seed", "7", "--out", path("t.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  r = invoke({"attack", "--tree", path("t.json"), "--channel", "phr", "--epsilon", "0.25", "--out",
           path("s.json"), "--transcript", path("q.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("queries "), std::string::npos);
  EXPECT_TRUE(fs::exists(path("q.jsonl")));
  r = invoke({"eval", "--target", path("t.json"), "--shadow", path("s.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("fidelity 1\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("error 0 over 1000 rows"), std::string::npos) << r.out;

  r = invoke({"baseline", "--tree", path("t.json"), "--epsilon", "0.25", "--out", path("b.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  r = invoke({"eval", "--target", path("t.json"), "--shadow", path("b.json"), "--grid-dataset", "500"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("over 500 rows"), std::string::npos);
}

TEST_F(CliTest, TrainOnIris) {
  auto r = invoke({"train", "--dataset", TREESTEALER_DATA_DIR "/iris.csv", "--out", path("iris.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_tree(path("iris.json")).num_features(), 4u);
  r = invoke({"attack", "--dataset", TREESTEALER_DATA_DIR "/iris.csv", "--epsilon", "0.01"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, StrictPhrFailsOnDeepTrees) {
  auto r = invoke({"gen-tree", "--features", "8", "--depth", "12:12", "--range", "0:256", "--grid", "1",
                "--out", path("deep.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  r = invoke({"attack", "--tree", path("deep.json"), "--channel", "phr", "--epsilon", "0.5"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("attack failed after"), std::string::npos);
  r = invoke({"attack", "--tree", path("deep.json"), "--channel", "perfect", "--epsilon", "0.5"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, SweepBothAndReport) {
  ASSERT_EQ(invoke({"gen-tree", "--seed", "3", "--out", path("t.json")}).code, 0);
  auto r = invoke({"sweep", "--tree", path("t.json"), "--attack", "both", "--eps-start", "0.5",
                "--out", path("sweep")});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const auto rep = load_report(path("sweep/report.json"));
  EXPECT_EQ(rep.series.size(), 2u);
  EXPECT_TRUE(rep.series.count("extractor"));
  EXPECT_TRUE(rep.series.count("baseline"));
  EXPECT_TRUE(fs::exists(path("sweep/extractor.csv")));
  EXPECT_TRUE(fs::exists(path("sweep/baseline.csv")));
  r = invoke({"report", "--in", path("sweep/report.json")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("frontier:"), std::string::npos);
}

TEST_F(CliTest, BaselineBudgetIsPartial) {
  ASSERT_EQ(invoke({"gen-tree", "--seed", "3", "--out", path("t.json")}).code, 0);
  const auto r = invoke({"baseline", "--tree", path("t.json"), "--epsilon", "0.001", "--max-queries", "5"});
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, AttackBudgetIsPartial) {
  ASSERT_EQ(invoke({"gen-tree", "--seed", "3", "--out", path("t.json")}).code, 0);
  const auto r = invoke({"attack", "--tree", path("t.json"), "--epsilon", "0.001", "--max-queries", "3"});
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  EXPECT_EQ(invoke({"attack", "--epsilon", "0.5"}).code, 1);
  EXPECT_EQ(invoke({"attack", "--tree", "a.json", "--dataset", "b.csv", "--epsilon", "1"}).code, 1);
  EXPECT_EQ(invoke({"attack", "--tree", path("missing.json"), "--epsilon", "1"}).code, 1);
  EXPECT_EQ(invoke({"attack", "--tree", path("missing.json"), "--epsilon", "-1"}).code, 1);
  EXPECT_EQ(invoke({"gen-tree", "--depth", "3"}).code, 1);
  EXPECT_EQ(invoke({"sweep", "--tree", path("missing.json")}).code, 1);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(CliTest, MalformedInputFails) {
  std::ofstream(path("bad.json")) << "{\"nodes\": []}";
  const auto r = invoke({"attack", "--tree", path("bad.json"), "--epsilon", "1"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("num_features"), std::string::npos) << r.err;
}

TEST_F(CliTest, Deterministic) {
  for (const char* run : {"a", "b"}) {
    const std::string d = path(run);
    ASSERT_EQ(invoke({"gen-tree", "--seed", "11", "--depth", "3:6", "--out", d + "/t.json"}).code, 0);
    ASSERT_EQ(invoke({"attack", "--tree", d + "/t.json", "--epsilon", "0.01", "--noise", "0.0",
                   "--transcript", d + "/q.jsonl", "--out", d + "/s.json"})
                  .code,
              0);
    ASSERT_EQ(invoke({"sweep", "--tree", d + "/t.json", "--attack", "both", "--out", d + "/sw"}).code % 2,
              0);
  }
  for (const char* f : {"t.json", "q.jsonl", "s.json", "sw/report.json", "sw/extractor.csv"}) {
    EXPECT_EQ(slurp(path("a") + "/" + f), slurp(path("b") + "/" + f)) << f;
  }
}
