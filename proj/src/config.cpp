#include "xtts/config.hpp"

#include <algorithm>
#include <fstream>

#include "xtts/error.hpp"

namespace xtts::config::inline XTTS_PRECISION {
namespace fs = std::filesystem;

RunConfig parse_run_config(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
  static const std::vector<std::string> sections = {"seed", "model", "train", "audio", "text", "speakers"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(sections.begin(), sections.end(), it.key()) == sections.end())
      throw Error(ErrorKind::Config, "unknown config key '" + it.key() + "'");

  RunConfig c;
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("speakers")) c.speakers = j.at("speakers").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config: ") + e.what());
  }
  if (j.contains("model")) {
    c.model = model::ModelConfig::from_json(j.at("model"), "model");
    c.has_model = true;
  }
  if (j.contains("train")) c.train = train::TrainConfig::from_json(j.at("train"), "train");
  if (j.contains("audio")) c.audio = audio::StftConfig::from_json(j.at("audio"), "audio");
  if (c.seed) c.train.seed = *c.seed;
  if (j.contains("text")) {
    const auto& t = j.at("text");
    if (!t.is_object()) throw Error(ErrorKind::Config, "text must be an object");
    for (auto it = t.begin(); it != t.end(); ++it)
      if (it.key() != "mode" && it.key() != "lexicon" && it.key() != "inventory")
        throw Error(ErrorKind::Config, "unknown config key 'text." + it.key() + "'");
    try {
      if (t.contains("mode")) c.text.mode = text::parse_mode(t.at("mode").get<std::string>());
      if (t.contains("lexicon")) c.text.lexicon = base_dir / t.at("lexicon").get<std::string>();
      if (t.contains("inventory")) c.text.inventory = base_dir / t.at("inventory").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Config, std::string("text: ") + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, std::string("text.mode: ") + e.what());
    }
  }
  c.train.validate();
  c.audio.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Config, "config " + path.string() + ": invalid JSON: " + e.what());
  }
  fs::path base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_run_config(j, base);
}

}  // namespace xtts::config::inline XTTS_PRECISION
