#include "xtts/datasel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "xtts/error.hpp"

namespace xtts::datasel {
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::set<std::string>& known_fields() {
  static const std::set<std::string> k = {"id", "audio", "text", "speaker", "lang_spans", "metrics",
                                          "unscorable", "score_error", "kept", "provenance"};
  return k;
}

std::string line_ctx(std::size_t line) { return "manifest line " + std::to_string(line) + ": "; }

fs::path absolute_normal(const fs::path& p) { return fs::absolute(p).lexically_normal(); }

std::string relative_to(const fs::path& target, const fs::path& dir) {
  const fs::path rel = absolute_normal(target).lexically_relative(absolute_normal(dir));
  return (rel.empty() ? absolute_normal(target) : rel).generic_string();
}

double snr_from_json(const nlohmann::json& v) {
  if (v.is_string() && v.get<std::string>() == "inf") return kInf;
  return v.get<double>();
}

nlohmann::json snr_to_json(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  return v;
}

}  // namespace

const char* to_string(Provenance p) { return p == Provenance::Found ? "found" : "target"; }

Provenance parse_provenance(std::string_view name) {
  if (name == "found") return Provenance::Found;
  if (name == "target") return Provenance::Target;
  throw Error(ErrorKind::Format, "unknown provenance '" + std::string(name) + "' (expected found or target)");
}

std::vector<std::string> Manifest::speakers() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.speaker);
  return {s.begin(), s.end()};
}

Record record_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw Error(ErrorKind::Format, line_ctx(line) + "record must be a JSON object");
  Record r;
  try {
    for (const char* field : {"id", "audio", "text", "speaker"})
      if (!j.contains(field) || !j.at(field).is_string())
        throw Error(ErrorKind::Format, line_ctx(line) + "missing string field '" + field + "'");
    r.id = j.at("id").get<std::string>();
    r.audio = j.at("audio").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.speaker = j.at("speaker").get<std::string>();
    if (r.id.empty()) throw Error(ErrorKind::Format, line_ctx(line) + "empty id");
    if (r.speaker.empty()) throw Error(ErrorKind::Format, line_ctx(line) + "empty speaker");
    if (j.contains("lang_spans") && !j.at("lang_spans").is_null()) {
      std::vector<text::LangSpan> spans;
      for (const auto& s : j.at("lang_spans")) {
        text::LangSpan span;
        span.lang = text::parse_lang(s.at("lang").get<std::string>());
        span.start = s.at("start").get<std::size_t>();
        span.end = s.at("end").get<std::size_t>();
        spans.push_back(span);
      }
      r.lang_spans = std::move(spans);
    }
    if (j.contains("metrics") && !j.at("metrics").is_null()) {
      const auto& m = j.at("metrics");
      r.metrics = audio::QualityMetrics{snr_from_json(m.at("snr_db")), m.at("speaking_rate").get<double>(),
                                        m.at("articulation").get<double>()};
    }
    r.unscorable = j.value("unscorable", false);
    r.score_error = j.value("score_error", std::string());
    if (j.contains("kept")) r.kept = j.at("kept").get<bool>();
    if (j.contains("provenance")) r.provenance = parse_provenance(j.at("provenance").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, line_ctx(line) + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) throw;
    throw Error(ErrorKind::Format, line_ctx(line) + e.what());
  }
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known_fields().count(it.key())) r.extra[it.key()] = it.value();
  return r;
}

nlohmann::json record_to_json(const Record& r) {
  nlohmann::json j = r.extra;
  j["id"] = r.id;
  j["audio"] = r.audio;
  j["text"] = r.text;
  j["speaker"] = r.speaker;
  if (r.lang_spans) {
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& s : *r.lang_spans)
      spans.push_back({{"lang", text::to_string(s.lang)}, {"start", s.start}, {"end", s.end}});
    j["lang_spans"] = spans;
  }
  if (r.metrics)
    j["metrics"] = {{"snr_db", snr_to_json(r.metrics->snr_db)},
                    {"speaking_rate", r.metrics->speaking_rate},
                    {"articulation", r.metrics->articulation}};
  if (r.unscorable) j["unscorable"] = true;
  if (!r.score_error.empty()) j["score_error"] = r.score_error;
  if (r.kept) j["kept"] = *r.kept;
  if (r.provenance) j["provenance"] = to_string(*r.provenance);
  return j;
}

Manifest parse_manifest(std::string_view contents, const fs::path& root) {
  Manifest m;
  m.root = root;
  std::set<std::string> ids;
  std::istringstream in{std::string(contents)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::Format, line_ctx(lineno) + "invalid JSON: " + e.what());
    }
    Record r = record_from_json(j, lineno);
    if (!ids.insert(r.id).second) throw Error(ErrorKind::Format, line_ctx(lineno) + "duplicate id '" + r.id + "'");
    m.records.push_back(std::move(r));
  }
  return m;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  fs::path root = path.parent_path();
  if (root.empty()) root = ".";
  return parse_manifest(ss.str(), root);
}

std::string serialize_manifest(const Manifest& m, const fs::path& out_dir) {
  std::string out;
  for (const auto& r : m.records) {
    Record copy = r;
    if (!fs::path(r.audio).is_absolute()) copy.audio = relative_to(m.root / r.audio, out_dir);
    out += record_to_json(copy).dump();
    out += '\n';
  }
  return out;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  fs::path dir = path.parent_path();
  if (dir.empty()) dir = ".";
  const std::string data = serialize_manifest(m, dir);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write manifest " + path.string());
  out << data;
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

fs::path resolve_audio(const Manifest& m, const Record& r) {
  const fs::path p(r.audio);
  return p.is_absolute() ? p : (m.root / p).lexically_normal();
}

ScoreReport score_corpus(Manifest& m, const text::SymbolInventory& inv, const audio::StftConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::ptrdiff_t>(m.records.size());
  std::vector<std::string> errors(m.records.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    Record& r = m.records[static_cast<std::size_t>(i)];
    r.metrics.reset();
    r.unscorable = false;
    r.score_error.clear();
    try {
      const audio::Waveform w = audio::wav_read(resolve_audio(m, r), cfg.sample_rate);
      const text::SymbolSequence seq = text::tokenize(r.text, inv);
      const audio::QualityMetrics q = audio::measure_quality(w, seq, cfg);
      r.metrics = q;
      if (std::isinf(q.snr_db)) {
        r.unscorable = true;
        r.score_error = "no measurable noise floor (SNR sentinel)";
      }
    } catch (const std::exception& e) {
      r.unscorable = true;
      r.score_error = e.what();
    }
    if (r.unscorable) errors[static_cast<std::size_t>(i)] = r.id + ": " + r.score_error;
  }
  ScoreReport rep;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    if (errors[i].empty())
      ++rep.scored;
    else
      rep.warnings.push_back(errors[i]);
  }
  return rep;
}

std::vector<double> composite_scores(const Manifest& m, const std::vector<std::size_t>& group) {
  std::vector<double> out(group.size(), kInf);
  std::vector<std::size_t> scorable;
  for (std::size_t g = 0; g < group.size(); ++g) {
    const Record& r = m.records[group[g]];
    if (r.unscorable) continue;
    if (!r.metrics) throw Error(ErrorKind::Data, "record '" + r.id + "' has no metrics; run score first");
    scorable.push_back(g);
  }
  if (scorable.empty()) return out;
  std::vector<double> composite(scorable.size(), 0.0);
  for (int metric = 0; metric < 3; ++metric) {
    std::vector<double> v;
    for (std::size_t g : scorable) {
      const auto& q = *m.records[group[g]].metrics;
      v.push_back(metric == 0 ? -q.snr_db : metric == 1 ? q.speaking_rate : -q.articulation);
    }
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) composite[i] += sd > 0 ? (v[i] - mean) / sd : 0.0;
  }
  for (std::size_t i = 0; i < scorable.size(); ++i) out[scorable[i]] = composite[i] / 3.0;
  return out;
}

void filter_corpus(Manifest& m, double drop_fraction) {
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0))
    throw Error(ErrorKind::Usage, "drop fraction must be in [0, 1), got " + std::to_string(drop_fraction));
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    if (m.records[i].kept == false) continue;
    by_speaker[m.records[i].speaker].push_back(i);
  }
  for (auto& [speaker, group] : by_speaker) {
    const std::vector<double> score = composite_scores(m, group);
    std::vector<std::size_t> order(group.size());
    std::iota(order.begin(), order.end(), 0);
    // Worst first: unscorable, then composite descending, then id descending.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const Record& ra = m.records[group[a]];
      const Record& rb = m.records[group[b]];
      if (ra.unscorable != rb.unscorable) return ra.unscorable;
      if (score[a] != score[b]) return score[a] > score[b];
      return ra.id > rb.id;
    });
    const std::size_t n = group.size();
    const auto want = static_cast<std::size_t>(std::ceil(drop_fraction * static_cast<double>(n) - 1e-9));
    const std::size_t drop = std::min(want, n - 1);
    for (std::size_t k = 0; k < n; ++k) m.records[group[order[k]]].kept = k >= drop;
  }
}

void select_top_speakers(Manifest& m, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::Usage, "--top-speakers must be >= 1");
  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < m.records.size(); ++i)
    if (m.records[i].kept != false) all.push_back(i);
  const std::vector<double> score = composite_scores(m, all);
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t g = 0; g < all.size(); ++g) {
    auto& [sum, count] = acc[m.records[all[g]].speaker];
    if (std::isfinite(score[g])) {
      sum += score[g];
      ++count;
    }
  }
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [speaker, a] : acc) ranked.emplace_back(a.second ? a.first / static_cast<double>(a.second) : kInf, speaker);
  std::sort(ranked.begin(), ranked.end());
  std::set<std::string> chosen;
  for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) chosen.insert(ranked[i].second);
  for (std::size_t i : all) m.records[i].kept = chosen.count(m.records[i].speaker) > 0;
}

Manifest kept_only(const Manifest& m) {
  Manifest out;
  out.root = m.root;
  for (const auto& r : m.records)
    if (r.kept != false) out.records.push_back(r);
  return out;
}

Manifest merge_manifests(const Manifest& found, const Manifest& target, const fs::path& root) {
  Manifest out;
  out.root = root;
  std::set<std::string> ids;
  std::map<std::string, Provenance> speaker_origin;
  auto take = [&](const Manifest& src, Provenance default_prov) {
    for (Record r : src.records) {
      if (!ids.insert(r.id).second) throw Error(ErrorKind::Data, "duplicate id '" + r.id + "' across manifests");
      if (!r.provenance) r.provenance = default_prov;
      auto [it, fresh] = speaker_origin.emplace(r.speaker, *r.provenance);
      if (!fresh && it->second != *r.provenance)
        throw Error(ErrorKind::Data, "speaker '" + r.speaker + "' appears in both found and target data");
      if (!fs::path(r.audio).is_absolute()) r.audio = relative_to(src.root / r.audio, root);
      out.records.push_back(std::move(r));
    }
  };
  take(found, Provenance::Found);
  take(target, Provenance::Target);
  return out;
}

}  // namespace xtts::datasel
