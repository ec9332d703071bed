#pragma once

// Run configuration file: one JSON object with optional sections. Every key
// is optional; unknown keys are rejected with their dotted path.
//
//   { "seed": 42,
//     "model": {...}, "train": {...}, "audio": {...},
//     "text": {"mode": "char", "lexicon": "lex.tsv", "inventory": "inv.json"},
//     "speakers": ["spk1", "spk2"] }
//
// Relative paths resolve against the config file's directory.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xtts/training.hpp"

namespace xtts::config::inline XTTS_PRECISION {

struct TextSection {
  text::Mode mode = text::Mode::Character;
  std::optional<std::filesystem::path> lexicon;
  std::optional<std::filesystem::path> inventory;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  model::ModelConfig model;
  train::TrainConfig train;
  audio::StftConfig audio;
  TextSection text;
  std::optional<std::vector<std::string>> speakers;
  bool has_model = false;  // a "model" section was present
};

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace xtts::config::inline XTTS_PRECISION
