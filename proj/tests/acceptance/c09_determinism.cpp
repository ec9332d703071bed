// The whole CLI pipeline, run twice with --seed 42, writes identical bytes.

#include <sstream>

#include <nlohmann/json.hpp>

#include "acceptance/acceptance.hpp"
#include "cli_runner.hpp"
#include "support.hpp"

namespace xtts::acceptance {

namespace {

namespace fs = std::filesystem;
using xtts::testing::run_cli;
using xtts::testing::slurp;

const std::vector<std::string> kOutputs = {
    "corpus/found.jsonl", "corpus/target.jsonl", "inventory.json", "found_scored.jsonl", "found_kept.jsonl",
    "mixed.jsonl",        "pretrain.ckpt",       "finetune.ckpt",  "synth.mel",          "synth.wav",
    "synth.json",         "diag.jsonl",          "corpus/wavs/found1_01.wav",
};

// Returns an error message, or "" on success.
std::string run_pipeline(const fs::path& d) {
  auto step = [&](std::vector<std::string> args) -> std::string {
    args.insert(args.begin(), {"--seed", "42"});
    const auto r = run_cli(args, d);
    if (r.code != 0) return args[2] + " exited " + std::to_string(r.code) + ": " + r.err;
    if (args[2] == "synth") std::ofstream(d / "synth.json") << r.out;
    return "";
  };
  auto p = [&](const char* name) { return (d / name).string(); };
  if (auto e = step({"toy-corpus", "--out", p("corpus"), "--found-speakers", "2", "--target-speakers", "2",
                     "--utterances", "6", "--defects"});
      !e.empty())
    return e;
  auto cfg = nlohmann::json::parse(slurp(d / "corpus" / "config.json"));
  cfg["train"]["pretrain_steps"] = 30;
  cfg["train"]["finetune_max_steps"] = 30;
  cfg["train"]["validate_every"] = 10;
  std::ofstream(d / "run.json") << cfg.dump(2);
  std::istringstream found(slurp(d / "corpus" / "found.jsonl"));
  std::string first;
  std::getline(found, first);
  const std::string text = nlohmann::json::parse(first).at("text");

  const std::vector<std::vector<std::string>> steps = {
      {"prepare", "--manifest", p("corpus/found.jsonl"), "--out", p("inventory.json")},
      {"score", "--manifest", p("corpus/found.jsonl"), "--config", p("run.json"), "--out", p("found_scored.jsonl")},
      {"filter", "--manifest", p("found_scored.jsonl"), "--drop", "0.1", "--out", p("found_kept.jsonl")},
      {"merge", "--found", p("found_kept.jsonl"), "--target", p("corpus/target.jsonl"), "--out", p("mixed.jsonl")},
      {"pretrain", "--config", p("run.json"), "--manifest", p("mixed.jsonl"), "--out", p("pretrain.ckpt")},
      {"finetune", "--config", p("run.json"), "--ckpt", p("pretrain.ckpt"), "--manifest", p("corpus/target.jsonl"),
       "--out", p("finetune.ckpt")},
      {"synth", "--ckpt", p("finetune.ckpt"), "--text", text, "--speaker", "target1", "--mel",
       p("synth.mel"), "--wav", p("synth.wav")},
      {"diag", "--ckpt", p("finetune.ckpt"), "--manifest", p("corpus/target.jsonl"), "--out", p("diag.jsonl")},
  };
  for (const auto& s : steps)
    if (auto e = step(s); !e.empty()) return e;
  return "";
}

}  // namespace

Outcome pipeline_determinism() {
  xtts::testing::TempDir a("accept_det_a"), b("accept_det_b");
  if (auto e = run_pipeline(a.path()); !e.empty()) return {false, "first run: " + e};
  if (auto e = run_pipeline(b.path()); !e.empty()) return {false, "second run: " + e};
  std::size_t same = 0;
  std::string differing;
  for (const auto& name : kOutputs) {
    const auto x = slurp(a / name), y = slurp(b / name);
    if (!x.empty() && x == y)
      ++same;
    else
      differing += " " + name + (x.empty() ? "(missing)" : "");
  }
  std::ostringstream os;
  os << same << "/" << kOutputs.size() << " outputs byte-identical";
  if (!differing.empty()) os << "; differ:" << differing;
  return {same == kOutputs.size(), os.str()};
}

}  // namespace xtts::acceptance
