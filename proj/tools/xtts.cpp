// xtts: command-line front end for the data selection, training and
// synthesis pipeline. Errors print one line "error: <kind>: <message>" and
// exit 2 for usage/configuration problems, 1 for everything else.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "xtts/config.hpp"
#include "xtts/datasel.hpp"
#include "xtts/error.hpp"
#include "xtts/evaldiag.hpp"
#include "xtts/kernels.hpp"
#include "xtts/parallel.hpp"
#include "xtts/toycorpus.hpp"
#include "xtts/training.hpp"

namespace fs = std::filesystem;
using namespace xtts;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  bool seed_given = false;
  int threads = 0;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
  out << data;
  if (!out) throw Error(ErrorKind::Io, "short write to " + p.string());
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw Error(ErrorKind::Io, std::string(what) + " not found: " + p.string());
}

std::vector<std::string> texts_of(const datasel::Manifest& m) {
  std::vector<std::string> t;
  for (const auto& r : m.records) t.push_back(r.text);
  return t;
}

text::SymbolInventory load_inventory(const fs::path& p) {
  try {
    return text::SymbolInventory::from_json(nlohmann::json::parse(read_file(p)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, "inventory " + p.string() + ": " + e.what());
  }
}

config::RunConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  require_file(path, "config");
  return config::load_run_config(path);
}

std::uint64_t effective_seed(const Globals& g, const config::RunConfig& rc) {
  if (g.seed_given) return g.seed;
  return rc.seed.value_or(g.seed);
}

std::string known_speakers(const std::map<std::string, std::size_t>& speakers) {
  std::string s;
  for (const auto& [name, row] : speakers) s += (s.empty() ? "" : ", ") + name;
  return s;
}

void log_step(const train::StepInfo& s) {
  if (s.validation_loss)
    std::cerr << "step " << s.step << " loss " << s.loss << " val " << *s.validation_loss << " lr " << s.lr << "\n";
  else if (s.step == 1 || s.step % 50 == 0)
    std::cerr << "step " << s.step << " loss " << s.loss << " lr " << s.lr << "\n";
}

// ---- commands ----

struct PrepareArgs {
  std::string manifest, mode = "char", lexicon, out;
};

void cmd_prepare(const PrepareArgs& a) {
  require_file(a.manifest, "manifest");
  const auto mode = text::parse_mode(a.mode);
  std::optional<text::Lexicon> lex;
  if (!a.lexicon.empty()) {
    require_file(a.lexicon, "lexicon");
    lex = text::Lexicon::load(a.lexicon);
  }
  const auto m = datasel::read_manifest(a.manifest);
  const auto texts = texts_of(m);
  const auto inv = text::SymbolInventory::build(texts, mode, lex ? &*lex : nullptr);
  write_file(a.out, inv.to_json().dump(2) + "\n");
  std::cerr << "inventory: " << inv.size() << " symbols\n";
}

struct ScoreArgs {
  std::string manifest, out, inventory, config;
};

void cmd_score(const ScoreArgs& a) {
  require_file(a.manifest, "manifest");
  const auto rc = load_config(a.config);
  auto m = datasel::read_manifest(a.manifest);
  text::SymbolInventory inv;
  if (!a.inventory.empty()) {
    require_file(a.inventory, "inventory");
    inv = load_inventory(a.inventory);
  } else if (rc.text.inventory) {
    inv = load_inventory(*rc.text.inventory);
  } else {
    const auto texts = texts_of(m);
    inv = text::SymbolInventory::build(texts, text::Mode::Character);
  }
  const auto rep = datasel::score_corpus(m, inv, rc.audio);
  for (const auto& w : rep.warnings) std::cerr << "warning: unscorable: " << w << "\n";
  datasel::write_manifest(a.out, m);
  std::cerr << "scored " << rep.scored << ", unscorable " << rep.warnings.size() << "\n";
}

struct FilterArgs {
  std::string manifest, out;
  double drop = 0.10;
  std::size_t top_speakers = 0;
};

void cmd_filter(const FilterArgs& a) {
  if (!(a.drop >= 0.0 && a.drop < 1.0))
    throw Error(ErrorKind::Usage, "--drop must be in [0, 1), got " + std::to_string(a.drop));
  require_file(a.manifest, "manifest");
  auto m = datasel::read_manifest(a.manifest);
  if (a.top_speakers > 0) datasel::select_top_speakers(m, a.top_speakers);
  datasel::filter_corpus(m, a.drop);
  const auto kept = datasel::kept_only(m);
  datasel::write_manifest(a.out, kept);
  std::cerr << "kept " << kept.records.size() << " of " << m.records.size() << " records\n";
}

struct MergeArgs {
  std::string found, target, out;
};

void cmd_merge(const MergeArgs& a) {
  require_file(a.found, "found manifest");
  require_file(a.target, "target manifest");
  const auto found = datasel::read_manifest(a.found);
  const auto target = datasel::read_manifest(a.target);
  fs::path dir = fs::path(a.out).parent_path();
  if (dir.empty()) dir = ".";
  const auto merged = datasel::merge_manifests(found, target, dir);
  datasel::write_manifest(a.out, merged);
  std::cerr << "merged " << merged.records.size() << " records\n";
}

struct PretrainArgs {
  std::string config, manifest, out, inventory;
};

void cmd_pretrain(const PretrainArgs& a, const Globals& g) {
  require_file(a.manifest, "manifest");
  const auto rc = load_config(a.config);
  train::PretrainInputs in;
  in.manifest = datasel::read_manifest(a.manifest);
  in.model = rc.model;
  in.stft = rc.audio;
  in.train = rc.train;
  in.train.seed = effective_seed(g, rc);
  in.speakers = rc.speakers;
  if (!a.inventory.empty()) {
    require_file(a.inventory, "inventory");
    in.inventory = load_inventory(a.inventory);
  } else if (rc.text.inventory) {
    in.inventory = load_inventory(*rc.text.inventory);
  } else {
    std::optional<text::Lexicon> lex;
    if (rc.text.lexicon) lex = text::Lexicon::load(*rc.text.lexicon);
    const auto texts = texts_of(datasel::kept_only(in.manifest));
    if (texts.empty()) throw Error(ErrorKind::Data, "pretrain: manifest has no records");
    in.inventory = text::SymbolInventory::build(texts, rc.text.mode, lex ? &*lex : nullptr);
  }
  const auto res = train::pretrain(in, log_step);
  train::save_checkpoint(a.out, res.checkpoint);
  std::cerr << "pretrained " << res.checkpoint.step << " steps, final loss "
            << (res.losses.empty() ? 0.0 : res.losses.back()) << "\n";
}

struct FinetuneArgs {
  std::string config, ckpt, manifest, out;
};

void cmd_finetune(const FinetuneArgs& a, const Globals& g) {
  require_file(a.ckpt, "checkpoint");
  require_file(a.manifest, "manifest");
  const auto rc = load_config(a.config);
  const auto base = train::load_checkpoint(a.ckpt);
  if (rc.has_model) train::check_compatible(base, rc.model);
  const auto target = datasel::read_manifest(a.manifest);
  for (const auto& r : target.records)
    if (!base.speakers.count(r.speaker))
      throw Error(ErrorKind::Usage, "unknown speaker '" + r.speaker + "' (known: " + known_speakers(base.speakers) + ")");
  auto tc = rc.train;
  tc.seed = effective_seed(g, rc);
  const auto res = train::finetune(base, target, tc, log_step);
  train::save_checkpoint(a.out, res.checkpoint);
  std::cerr << "finetuned " << res.checkpoint.step << " steps (best at " << res.best_step << ")"
            << (res.stopped_early ? ", stopped early" : "") << "\n";
}

struct SynthArgs {
  std::string ckpt, text, speaker, wav, mel;
  int gl_iters = 60;
};

void cmd_synth(const SynthArgs& a) {
  require_file(a.ckpt, "checkpoint");
  if (a.gl_iters < 1) throw Error(ErrorKind::Usage, "--gl-iters must be >= 1");
  const auto ckpt = train::load_checkpoint(a.ckpt);
  auto it = ckpt.speakers.find(a.speaker);
  if (it == ckpt.speakers.end())
    throw Error(ErrorKind::Usage, "unknown speaker '" + a.speaker + "' (known: " + known_speakers(ckpt.speakers) + ")");
  const auto seq = text::tokenize(a.text, ckpt.inventory);
  const auto mask = text::derive_language_mask(a.text, seq);
  const auto res = model::synthesize(ckpt.params, ckpt.model, seq, mask, it->second);
  if (!a.mel.empty()) audio::write_mel(a.mel, res.mel);
  if (!a.wav.empty()) {
    const audio::MelSpectrogram mel{res.mel, ckpt.stft};
    audio::wav_write(a.wav, audio::griffin_lim(mel, a.gl_iters));
  }
  const auto diag = eval::diagnose_alignment(res.alignment, !res.truncated);
  nlohmann::json summary = {{"speaker", a.speaker},
                            {"frames", res.mel.rows},
                            {"stopped_at", res.stopped_at},
                            {"truncated", res.truncated},
                            {"alignment", diag.to_json()}};
  std::cout << summary.dump() << "\n";
}

struct DiagArgs {
  std::string ckpt, manifest, out;
};

void cmd_diag(const DiagArgs& a) {
  require_file(a.ckpt, "checkpoint");
  require_file(a.manifest, "manifest");
  const auto ckpt = train::load_checkpoint(a.ckpt);
  const auto m = datasel::kept_only(datasel::read_manifest(a.manifest));
  const auto tf = eval::teacher_forced_eval(ckpt, m);
  const auto examples = train::load_examples(m, ckpt.inventory, ckpt.speakers, ckpt.stft);
  std::vector<nlohmann::json> rows(examples.size());
  std::vector<eval::AlignmentDiagnostics> diags(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) {
    const auto& ex = examples[i];
    const auto s = model::synthesize(ckpt.params, ckpt.model, ex.seq, ex.mask, ex.speaker);
    diags[i] = eval::diagnose_alignment(s.alignment, !s.truncated);
    nlohmann::json row = diags[i].to_json();
    row["id"] = ex.id;
    row["teacher_forced_loss"] = tf.records[i].loss;
    row["signature_distance"] = eval::speaker_signature_distance(s.mel, ex.mel);
    rows[i] = std::move(row);
  });
  std::string out;
  double focus = 0.0, coverage = 0.0;
  std::size_t violations = 0, terminated = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += rows[i].dump() + "\n";
    focus += diags[i].focus_rate;
    coverage += diags[i].coverage;
    violations += diags[i].monotonicity_violations;
    terminated += diags[i].terminated ? 1 : 0;
  }
  const double n = static_cast<double>(rows.size());
  nlohmann::json summary = {{"summary", true},
                            {"records", rows.size()},
                            {"mean_teacher_forced_loss", tf.mean_loss},
                            {"mean_focus_rate", focus / n},
                            {"mean_coverage", coverage / n},
                            {"monotonicity_violations", violations},
                            {"terminated", terminated}};
  out += summary.dump() + "\n";
  write_file(a.out, out);
  std::cerr << "diagnosed " << rows.size() << " records, mean teacher-forced loss " << tf.mean_loss << "\n";
}

struct ToyArgs {
  std::string out;
  std::size_t found = 2, target = 2, utterances = 12;
  bool defects = false;
};

void cmd_toy(const ToyArgs& a, const Globals& g) {
  toy::CorpusSpec spec;
  spec.found_speakers = a.found;
  spec.target_speakers = a.target;
  spec.utterances_per_speaker = a.utterances;
  spec.plant_defects = a.defects;
  spec.seed = g.seed;
  const auto files = toy::write_corpus(a.out, spec);
  std::cerr << "wrote " << files.found_manifest.string() << ", " << files.target_manifest.string() << ", "
            << files.config.string() << "\n";
}

int exit_code(ErrorKind k) { return (k == ErrorKind::Usage || k == ErrorKind::Config) ? 2 : 1; }

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xtts: code-switched voice cloning toolkit"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker thread cap (fallback: XTTS_THREADS)");

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Build a symbol inventory from a manifest");
  prepare->add_option("--manifest", prep.manifest)->required();
  prepare->add_option("--mode", prep.mode, "char or phoneme")->capture_default_str();
  prepare->add_option("--lexicon", prep.lexicon, "word<TAB>phonemes file (phoneme mode)");
  prepare->add_option("--out", prep.out)->required();

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Fill quality metrics for every record");
  score_cmd->add_option("--manifest", score.manifest)->required();
  score_cmd->add_option("--out", score.out)->required();
  score_cmd->add_option("--inventory", score.inventory);
  score_cmd->add_option("--config", score.config, "Run config (audio section)");

  FilterArgs filt;
  auto* filter = app.add_subcommand("filter", "Drop the lowest-quality records per speaker");
  filter->add_option("--manifest", filt.manifest)->required();
  filter->add_option("--drop", filt.drop)->capture_default_str();
  filter->add_option("--top-speakers", filt.top_speakers, "Keep only the N best speakers first");
  filter->add_option("--out", filt.out)->required();

  MergeArgs mrg;
  auto* merge = app.add_subcommand("merge", "Combine found and target manifests");
  merge->add_option("--found", mrg.found)->required();
  merge->add_option("--target", mrg.target)->required();
  merge->add_option("--out", mrg.out)->required();

  PretrainArgs pre;
  auto* pretrain = app.add_subcommand("pretrain", "Multi-speaker pretraining");
  pretrain->add_option("--config", pre.config);
  pretrain->add_option("--manifest", pre.manifest)->required();
  pretrain->add_option("--inventory", pre.inventory);
  pretrain->add_option("--out", pre.out)->required();

  FinetuneArgs fin;
  auto* finetune = app.add_subcommand("finetune", "Finetune with the encoder frozen");
  finetune->add_option("--config", fin.config);
  finetune->add_option("--ckpt", fin.ckpt)->required();
  finetune->add_option("--manifest", fin.manifest)->required();
  finetune->add_option("--out", fin.out)->required();

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Synthesize text in a speaker's voice");
  synth->add_option("--ckpt", syn.ckpt)->required();
  synth->add_option("--text", syn.text)->required();
  synth->add_option("--speaker", syn.speaker)->required();
  synth->add_option("--wav", syn.wav);
  synth->add_option("--mel", syn.mel);
  synth->add_option("--gl-iters", syn.gl_iters)->capture_default_str();

  DiagArgs dia;
  auto* diag = app.add_subcommand("diag", "Alignment and fit diagnostics per record");
  diag->add_option("--ckpt", dia.ckpt)->required();
  diag->add_option("--manifest", dia.manifest)->required();
  diag->add_option("--out", dia.out)->required();

  ToyArgs toy_args;
  auto* toy_cmd = app.add_subcommand("toy-corpus", "Write a synthetic multi-speaker corpus");
  toy_cmd->add_option("--out", toy_args.out)->required();
  toy_cmd->add_option("--found-speakers", toy_args.found)->capture_default_str();
  toy_cmd->add_option("--target-speakers", toy_args.target)->capture_default_str();
  toy_cmd->add_option("--utterances", toy_args.utterances)->capture_default_str();
  toy_cmd->add_flag("--defects", toy_args.defects, "Plant noise/tempo/flatness defects");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (g.threads == 0) {
      if (const char* env = std::getenv("XTTS_THREADS")) {
        try {
          g.threads = std::stoi(env);
        } catch (const std::exception&) {
          throw Error(ErrorKind::Usage, std::string("XTTS_THREADS is not an integer: ") + env);
        }
      }
    }
    if (g.threads < 0) throw Error(ErrorKind::Usage, "--threads must be >= 0");
    kernels::set_max_threads(g.threads);

    if (*prepare) cmd_prepare(prep);
    else if (*score_cmd) cmd_score(score);
    else if (*filter) cmd_filter(filt);
    else if (*merge) cmd_merge(mrg);
    else if (*pretrain) cmd_pretrain(pre, g);
    else if (*finetune) cmd_finetune(fin, g);
    else if (*synth) cmd_synth(syn);
    else if (*diag) cmd_diag(dia);
    else if (*toy_cmd) cmd_toy(toy_args, g);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
