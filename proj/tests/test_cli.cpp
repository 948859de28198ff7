#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "splitprune/brute_oracle.hpp"
#include "splitprune/cli.hpp"

using namespace splitprune;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("splitprune_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& leaf) const { return (dir_ / leaf).string(); }

  // A few-second training run on toy3.
  std::vector<std::string> quick_train(const std::string& out) const {
    return {"train",           "--preset",    "toy3",
            "--seed",          "7",           "-o",
            out,               "--set",       "train.hidden=16",
            "--set",           "train.batch_size=8", "--set",
            "train.warmup_per_option=3", "--episodes", "10"};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, PresetsListed) {
  const Result r = run_cli({"presets"});
  EXPECT_EQ(r.code, cli::kOk);
  for (const std::string& name : preset_names()) EXPECT_NE(r.out.find(name), std::string::npos);
  EXPECT_EQ(run_cli({"presets", "--dump", "toy3"}).out, preset_text("toy3"));
  EXPECT_EQ(run_cli({"presets", "--dump", "nope"}).code, cli::kConfigError);
}

TEST_F(CliTest, UsageErrorsAreConfigErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"fly"}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"train", "--bogus"}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kOk);
}

TEST_F(CliTest, TrainTwiceIsByteIdentical) {
  const Result a = run_cli(quick_train(path("a")));
  ASSERT_EQ(a.code, cli::kOk) << a.err;
  const Result b = run_cli(quick_train(path("b")));
  ASSERT_EQ(b.code, cli::kOk) << b.err;
  for (const char* f : {"metrics.csv", "checkpoint.json", "plan.json"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  const std::vector<std::string> rows = lines(slurp(dir_ / "a" / "metrics.csv"));
  ASSERT_EQ(rows.size(), 1u + 12u + 10u);
  EXPECT_EQ(rows[0], "episode,option,reward,t_edge,t_trans,t_cloud,acc,loss_q,loss_option,noise_scale");
  EXPECT_TRUE(fs::exists(dir_ / "a" / "overrides.txt"));
}

TEST_F(CliTest, ConfigEchoedVerbatim) {
  const std::string cfg = "# mine\n[model]\npreset = \"toy3\"\n[train]\nhidden = 8\nbatch_size = 4\n"
                          "warmup_per_option = 1\nepisodes = 2\n";
  fs::create_directories(dir_);
  std::ofstream(path("run.toml")) << cfg;
  const Result r = run_cli({"train", "-c", path("run.toml"), "-o", path("out")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(slurp(dir_ / "out" / "config.toml"), cfg);
}

TEST_F(CliTest, UnknownPresetNamesValidOnes) {
  const Result r = run_cli({"train", "--preset", "alexnet", "-o", path("x")});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("toy3"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("vgg16"), std::string::npos) << r.err;
}

TEST_F(CliTest, BadConfigFileIsConfigError) {
  fs::create_directories(dir_);
  std::ofstream(path("bad.toml")) << "[env]\nwarp = 9\n";
  EXPECT_EQ(run_cli({"train", "-c", path("bad.toml")}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"train", "-c", path("missing.toml")}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"train", "--set", "train.batch_size=0"}).code, cli::kConfigError);
}

TEST_F(CliTest, PlanFromCheckpoint) {
  ASSERT_EQ(run_cli(quick_train(path("t"))).code, cli::kOk);
  const std::string ckpt = (dir_ / "t" / "checkpoint.json").string();

  const Result text = run_cli({"plan", "--preset", "toy3", "--checkpoint", ckpt});
  ASSERT_EQ(text.code, cli::kOk) << text.err;
  EXPECT_NE(text.out.find("partition:"), std::string::npos);
  EXPECT_NE(text.out.find("t_trans:"), std::string::npos);

  const Result js = run_cli({"plan", "--preset", "toy3", "--checkpoint", ckpt, "--json"});
  ASSERT_EQ(js.code, cli::kOk);
  const nlohmann::json j = nlohmann::json::parse(js.out);
  EXPECT_GE(j["partition"].get<int>(), 0);
  EXPECT_LE(j["partition"].get<int>(), 4);
  EXPECT_EQ(j["rates"].size(), 3u);
  EXPECT_EQ(j, nlohmann::json::parse(slurp(dir_ / "t" / "plan.json")));

  EXPECT_EQ(run_cli({"plan", "--preset", "toy4", "--checkpoint", ckpt}).code, cli::kConfigError);
}

TEST_F(CliTest, CorruptedCheckpointIsRuntimeError) {
  fs::create_directories(dir_);
  std::ofstream(path("broken.json")) << "{\"format\": \"splitprune-agent\", \"version\": 1, ";
  const Result r = run_cli({"plan", "--checkpoint", path("broken.json")});
  EXPECT_EQ(r.code, cli::kRuntimeError);
  EXPECT_NE(r.err.find("parse error"), std::string::npos) << r.err;

  std::ofstream(path("wrong.json")) << "{\"format\": \"other\"}";
  EXPECT_EQ(run_cli({"plan", "--checkpoint", path("wrong.json")}).code, cli::kRuntimeError);
  EXPECT_EQ(run_cli({"inspect", "--checkpoint", path("wrong.json")}).code, cli::kRuntimeError);
}

TEST_F(CliTest, InspectSummarizes) {
  ASSERT_EQ(run_cli(quick_train(path("t"))).code, cli::kOk);
  const Result r = run_cli({"inspect", "--checkpoint", (dir_ / "t" / "checkpoint.json").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("episodes done: 10"), std::string::npos) << r.out;
}

TEST_F(CliTest, BruteAgreesWithLibrary) {
  const auto start = std::chrono::steady_clock::now();
  const Result r = run_cli({"brute", "--preset", "toy3", "-o", path("b"), "--json"});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_LT(seconds, 10.0);

  const LayerGraph g = preset("toy3");
  const SurrogateOracle oracle(g, 0.9);
  const BruteResult lib = enumerate_best(g, Environment{}, oracle, Grid::coarse(g), true);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["partition"].get<int>(), lib.best.plan.partition);
  EXPECT_EQ(j["rates"].get<std::vector<double>>(), lib.best.plan.prune.rates);
  EXPECT_EQ(j["reward"].get<double>(), lib.best.reward);
  EXPECT_EQ(j["evaluated"].get<std::uint64_t>(), 500u);

  std::ostringstream table;
  write_table_csv(table, g, lib.table);
  EXPECT_EQ(slurp(dir_ / "b" / "brute.csv"), table.str());
}

TEST_F(CliTest, BruteCapRefused) {
  const Result r = run_cli({"brute", "--preset", "vgg16", "-o", path("v")});
  EXPECT_EQ(r.code, cli::kRefused);
  EXPECT_NE(r.err.find("refused"), std::string::npos);
  EXPECT_EQ(run_cli({"brute", "--preset", "toy3", "--cap", "10", "-o", path("c")}).code, cli::kRefused);
}

TEST_F(CliTest, SweepRcompOnToy4) {
  const Result r = run_cli({"sweep", "--preset", "toy4", "--param", "r_comp=10,20,80", "-o", path("s")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const std::vector<std::string> rows = lines(slurp(dir_ / "s" / "sweep.csv"));
  ASSERT_EQ(rows.size(), 4u);
  int prev = 1 << 30;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::string param, value, partition;
    std::getline(in, param, ',');
    std::getline(in, value, ',');
    std::getline(in, partition, ',');
    EXPECT_EQ(param, "env.r_comp");
    const int p = std::stoi(partition);
    EXPECT_LE(p, prev) << rows[i];
    prev = p;
  }
}

TEST_F(CliTest, SweepSingleValueAndPlanBackend) {
  const Result one = run_cli({"sweep", "--preset", "toy3", "--param", "acc_req=0.8", "-o", path("one")});
  ASSERT_EQ(one.code, cli::kOk) << one.err;
  EXPECT_EQ(lines(slurp(dir_ / "one" / "sweep.csv")).size(), 2u);

  ASSERT_EQ(run_cli(quick_train(path("t"))).code, cli::kOk);
  const Result plan = run_cli({"sweep", "--preset", "toy3", "--param", "r_comp=10,80", "--backend", "plan",
                               "--checkpoint", (dir_ / "t" / "checkpoint.json").string(), "-o", path("p")});
  ASSERT_EQ(plan.code, cli::kOk) << plan.err;
  EXPECT_EQ(lines(slurp(dir_ / "p" / "sweep.csv")).size(), 3u);

  EXPECT_EQ(run_cli({"sweep", "--param", "r_comp"}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"sweep", "--param", "r_comp=1", "--backend", "plan"}).code, cli::kConfigError);
}
