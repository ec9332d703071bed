#pragma once

// Corpus manifests (JSON lines), quality scoring and per-speaker filtering.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xtts/audio.hpp"
#include "xtts/text.hpp"

namespace xtts::datasel {

enum class Provenance { Found, Target };

const char* to_string(Provenance p);
Provenance parse_provenance(std::string_view name);

struct Record {
  std::string id;
  std::string audio;  // as written in the manifest; relative paths resolve against Manifest::root
  std::string text;
  std::string speaker;
  std::optional<std::vector<text::LangSpan>> lang_spans;
  std::optional<audio::QualityMetrics> metrics;
  bool unscorable = false;
  std::string score_error;
  std::optional<bool> kept;
  std::optional<Provenance> provenance;
  nlohmann::json extra = nlohmann::json::object();  // unknown fields, preserved verbatim
};

struct Manifest {
  std::vector<Record> records;
  std::filesystem::path root;  // directory the audio paths are relative to

  std::vector<std::string> speakers() const;  // sorted, unique
};

Record record_from_json(const nlohmann::json& j, std::size_t line);
nlohmann::json record_to_json(const Record& r);

// Duplicate ids, missing required fields and bad JSON are Format errors with the line number.
Manifest parse_manifest(std::string_view contents, const std::filesystem::path& root);
Manifest read_manifest(const std::filesystem::path& path);
// Audio paths are rewritten relative to `out_dir`.
std::string serialize_manifest(const Manifest& m, const std::filesystem::path& out_dir);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

std::filesystem::path resolve_audio(const Manifest& m, const Record& r);

struct ScoreReport {
  std::size_t scored = 0;
  std::vector<std::string> warnings;  // one per unscorable record
};

// Fills metrics for every record. Records whose audio cannot be read, whose
// text does not tokenize, or whose SNR hits the +inf sentinel are flagged
// unscorable; the run continues.
ScoreReport score_corpus(Manifest& m, const text::SymbolInventory& inv, const audio::StftConfig& cfg);

// Mean of the z-scores of (-snr_db, speaking_rate, -articulation) over `group`
// (population std; a zero std contributes 0). Higher is worse. Unscorable
// records get +infinity and do not enter the statistics.
std::vector<double> composite_scores(const Manifest& m, const std::vector<std::size_t>& group);

// Sets `kept` on every record: per speaker, the min(ceil(f*n), n-1) worst
// records are dropped, unscorable first, then by composite, ties dropping the
// higher id.
void filter_corpus(Manifest& m, double drop_fraction);

// Keeps only the `n` speakers with the lowest mean corpus-wide composite
// (ties by name); records of other speakers get kept = false.
void select_top_speakers(Manifest& m, std::size_t n);

// Records of `m` whose kept flag is unset or true.
Manifest kept_only(const Manifest& m);

// Provenance is stamped on records that lack one. Ids must be unique across
// both inputs, and no speaker may appear under both provenances.
Manifest merge_manifests(const Manifest& found, const Manifest& target, const std::filesystem::path& root);

}  // namespace xtts::datasel
