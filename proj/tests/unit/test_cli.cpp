#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "cli_runner.hpp"
#include "support.hpp"

using xtts::testing::CliResult;
using xtts::testing::run_cli;
using xtts::testing::slurp;
using xtts::testing::TempDir;

namespace {

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

// A toy corpus plus a small pretrained checkpoint, built once through the CLI.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const auto d = dir_->path();
    auto ok = [&](std::vector<std::string> args) {
      auto r = run_cli(args, d);
      ASSERT_EQ(r.code, 0) << args[0] << ": " << r.err;
    };
    ok({"toy-corpus", "--out", (d / "corpus").string(), "--utterances", "6"});
    auto cfg = nlohmann::json::parse(slurp(d / "corpus" / "config.json"));
    cfg["train"]["pretrain_steps"] = 10;
    cfg["train"]["finetune_max_steps"] = 10;
    cfg["model"]["max_decoder_steps"] = 8;
    std::ofstream(d / "small.json") << cfg.dump(2);
    ok({"merge", "--found", (d / "corpus" / "found.jsonl").string(), "--target",
        (d / "corpus" / "target.jsonl").string(), "--out", (d / "mixed.jsonl").string()});
    ok({"pretrain", "--config", (d / "small.json").string(), "--manifest", (d / "mixed.jsonl").string(), "--out",
        (d / "base.ckpt").string()});
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static std::filesystem::path path(const std::string& name) { return dir_->path() / name; }
  static CliResult run(const std::vector<std::string>& args, const std::string& env = "") {
    return run_cli(args, dir_->path(), env);
  }

  static inline TempDir* dir_ = nullptr;
};

}  // namespace

TEST_F(Cli, UnknownFlagIsUsageError) {
  auto r = run({"filter", "--manifest", "x", "--out", "y", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.err, "error: usage:")) << r.err;
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST_F(Cli, DropOfOneRejected) {
  auto r = run({"filter", "--manifest", path("mixed.jsonl").string(), "--drop", "1.0", "--out",
                path("never.jsonl").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.err, "error: usage:")) << r.err;
  EXPECT_FALSE(std::filesystem::exists(path("never.jsonl")));
}

TEST_F(Cli, MissingInputIsIoError) {
  auto r = run({"score", "--manifest", path("absent.jsonl").string(), "--out", path("s.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(contains(r.err, "error: io:")) << r.err;
}

TEST_F(Cli, ErrorIsOneLine) {
  auto r = run({"score", "--manifest", path("absent.jsonl").string(), "--out", path("s.jsonl").string()});
  ASSERT_FALSE(r.err.empty());
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
}

TEST_F(Cli, UnknownConfigKeyNamed) {
  std::ofstream(path("bad.json")) << R"({"train": {"batch_size": 2, "learning_rate": 1}})";
  auto r = run({"pretrain", "--config", path("bad.json").string(), "--manifest", path("mixed.jsonl").string(),
                "--out", path("bad.ckpt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.err, "train.learning_rate")) << r.err;
  EXPECT_FALSE(std::filesystem::exists(path("bad.ckpt")));
}

TEST_F(Cli, SynthUnknownSpeakerListsKnownOnes) {
  auto r = run({"synth", "--ckpt", path("base.ckpt").string(), "--text", "ab", "--speaker", "nobody"});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.err, "nobody")) << r.err;
  for (const char* s : {"found1", "found2", "target1", "target2"}) EXPECT_TRUE(contains(r.err, s)) << r.err;
}

TEST_F(Cli, SynthWritesMelWavAndSummary) {
  auto r = run({"synth", "--ckpt", path("base.ckpt").string(), "--text", "你好 abc", "--speaker", "target1", "--mel",
                path("o.mel").string(), "--wav", path("o.wav").string(), "--gl-iters", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("speaker"), "target1");
  EXPECT_TRUE(j.at("alignment").contains("focus_rate"));
  EXPECT_EQ(slurp(path("o.mel")).substr(0, 4), "MEL1");
  EXPECT_EQ(slurp(path("o.wav")).substr(0, 4), "RIFF");
}

TEST_F(Cli, ThreadsFlagAndEnvironmentGiveSameBytes) {
  const auto manifest = path("corpus/target.jsonl").string();
  ASSERT_EQ(run({"--threads", "1", "score", "--manifest", manifest, "--out", path("t1.jsonl").string()}).code, 0);
  ASSERT_EQ(run({"score", "--manifest", manifest, "--out", path("t2.jsonl").string()}, "XTTS_THREADS=2").code, 0);
  EXPECT_EQ(slurp(path("t1.jsonl")), slurp(path("t2.jsonl")));
}

TEST_F(Cli, PipelineLeavesInputsUntouched) {
  const auto found = path("corpus/found.jsonl"), target = path("corpus/target.jsonl");
  const auto found_before = slurp(found), target_before = slurp(target), base_before = slurp(path("base.ckpt"));
  auto ok = [&](std::vector<std::string> args) {
    auto r = run(args);
    EXPECT_EQ(r.code, 0) << args[0] << ": " << r.err;
    return r;
  };
  ok({"prepare", "--manifest", path("mixed.jsonl").string(), "--out", path("inv.json").string()});
  ok({"score", "--manifest", found.string(), "--inventory", path("inv.json").string(), "--out",
      path("scored.jsonl").string()});
  ok({"filter", "--manifest", path("scored.jsonl").string(), "--drop", "0.2", "--out", path("kept.jsonl").string()});
  ok({"finetune", "--config", path("small.json").string(), "--ckpt", path("base.ckpt").string(), "--manifest",
      target.string(), "--out", path("tuned.ckpt").string()});
  ok({"diag", "--ckpt", path("tuned.ckpt").string(), "--manifest", target.string(), "--out",
      path("report.jsonl").string()});
  EXPECT_EQ(slurp(found), found_before);
  EXPECT_EQ(slurp(target), target_before);
  EXPECT_EQ(slurp(path("base.ckpt")), base_before);

  std::istringstream report(slurp(path("report.jsonl")));
  std::vector<nlohmann::json> rows;
  for (std::string line; std::getline(report, line);) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), 13u);
  EXPECT_TRUE(rows.back().at("summary").get<bool>());
  EXPECT_TRUE(rows.front().contains("teacher_forced_loss"));
  EXPECT_TRUE(rows.front().contains("monotonicity_violations"));
}
