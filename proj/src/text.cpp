#include "xtts/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "xtts/error.hpp"
#include "xtts/utf8.hpp"

namespace xtts::text {
namespace {

struct Unit {
  enum class Kind { Space, Word, Punct } kind;
  std::vector<char32_t> cps;
  std::size_t offset;
};

enum class CharClass { Space, Cjk, Latin, Other };

CharClass classify(char32_t cp) {
  if (utf8::is_space(cp)) return CharClass::Space;
  if (utf8::is_cjk(cp)) return CharClass::Cjk;
  if (utf8::is_latin_alnum(cp)) return CharClass::Latin;
  return CharClass::Other;
}

// Splits into units. Whitespace runs become one Space unit, except at the ends
// where they vanish. Character mode emits one unit per code point; phoneme mode
// groups CJK runs and Latin runs into words.
std::vector<Unit> segment(const std::vector<char32_t>& cps, Mode mode) {
  std::vector<Unit> units;
  std::size_t i = 0;
  while (i < cps.size()) {
    const CharClass cls = classify(cps[i]);
    if (cls == CharClass::Space) {
      const std::size_t start = i;
      while (i < cps.size() && classify(cps[i]) == CharClass::Space) ++i;
      if (!units.empty() && i < cps.size())
        units.push_back({Unit::Kind::Space, {U' '}, start});
      continue;
    }
    if (mode == Mode::Phoneme && (cls == CharClass::Cjk || cls == CharClass::Latin)) {
      const std::size_t start = i;
      while (i < cps.size() && classify(cps[i]) == cls) ++i;
      units.push_back({Unit::Kind::Word,
                       std::vector<char32_t>(cps.begin() + static_cast<std::ptrdiff_t>(start),
                                             cps.begin() + static_cast<std::ptrdiff_t>(i)),
                       start});
      continue;
    }
    units.push_back({cls == CharClass::Other ? Unit::Kind::Punct : Unit::Kind::Word,
                     {cps[i]}, i});
    ++i;
  }
  return units;
}

struct Piece {
  std::string symbol;
  std::size_t offset;
  bool space;
};

std::vector<Piece> expand(const std::vector<Unit>& units, Mode mode,
                          const Lexicon* lexicon, std::set<std::string>* missing) {
  std::vector<Piece> pieces;
  for (const Unit& u : units) {
    if (u.kind == Unit::Kind::Space) {
      pieces.push_back({" ", u.offset, true});
      continue;
    }
    const std::string word = utf8::encode(u.cps);
    if (mode == Mode::Character) {
      pieces.push_back({word, u.offset, false});
      continue;
    }
    const auto* phones = lexicon ? lexicon->find(word) : nullptr;
    if (phones) {
      for (const auto& ph : *phones) pieces.push_back({ph, u.offset, false});
      continue;
    }
    if (u.kind == Unit::Kind::Punct) {
      pieces.push_back({word, u.offset, false});
      continue;
    }
    // CJK runs fall back to per-character entries.
    bool covered = u.cps.size() > 1 && utf8::is_cjk(u.cps.front());
    std::vector<Piece> per_char;
    for (std::size_t k = 0; covered && k < u.cps.size(); ++k) {
      const auto* ch = lexicon ? lexicon->find(utf8::encode(u.cps[k])) : nullptr;
      if (!ch) {
        covered = false;
        break;
      }
      for (const auto& ph : *ch) per_char.push_back({ph, u.offset + k, false});
    }
    if (covered) {
      pieces.insert(pieces.end(), per_char.begin(), per_char.end());
    } else if (missing) {
      missing->insert(word);
    }
  }
  return pieces;
}

std::string join(const std::set<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ", ";
    out += "'" + w + "'";
  }
  return out;
}

}  // namespace

const char* to_string(Mode mode) {
  return mode == Mode::Character ? "character" : "phoneme";
}

const char* to_string(Lang lang) { return lang == Lang::CN ? "CN" : "EN"; }

Mode parse_mode(std::string_view name) {
  if (name == "char" || name == "character") return Mode::Character;
  if (name == "phoneme") return Mode::Phoneme;
  throw Error(ErrorKind::Usage, "unknown input mode '" + std::string(name) +
                                    "' (expected char or phoneme)");
}

Lang parse_lang(std::string_view name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "CN" || up == "CH" || up == "ZH") return Lang::CN;
  if (up == "EN") return Lang::EN;
  throw Error(ErrorKind::Data, "unknown language '" + std::string(name) + "'");
}

Lexicon Lexicon::parse(std::string_view contents) {
  Lexicon lex;
  std::istringstream in{std::string(contents)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw Error(ErrorKind::Format,
                  "lexicon line " + std::to_string(line_no) + ": expected word<TAB>phonemes");
    std::vector<std::string> phones;
    std::istringstream ps(line.substr(tab + 1));
    for (std::string ph; ps >> ph;) phones.push_back(ph);
    if (phones.empty())
      throw Error(ErrorKind::Format,
                  "lexicon line " + std::to_string(line_no) + ": no phonemes");
    lex.entries_[line.substr(0, tab)] = std::move(phones);
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open lexicon " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const std::vector<std::string>* Lexicon::find(std::string_view word) const {
  if (auto it = entries_.find(std::string(word)); it != entries_.end())
    return &it->second;
  std::string lower(word);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) {
    return static_cast<char>(c < 0x80 ? std::tolower(c) : c);
  });
  if (auto it = entries_.find(lower); it != entries_.end()) return &it->second;
  return nullptr;
}

nlohmann::json Lexicon::to_json() const { return entries_; }

Lexicon Lexicon::from_json(const nlohmann::json& j) {
  Lexicon lex;
  lex.entries_ = j.get<std::map<std::string, std::vector<std::string>>>();
  return lex;
}

SymbolInventory::SymbolInventory(Mode mode, std::vector<std::string> symbols,
                                 Lexicon lexicon)
    : mode_(mode), symbols_(std::move(symbols)), lexicon_(std::move(lexicon)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], i).second)
      throw Error(ErrorKind::Format, "duplicate symbol '" + symbols_[i] + "' in inventory");
  }
}

SymbolInventory SymbolInventory::build(std::span<const std::string> texts, Mode mode,
                                       const Lexicon* lexicon) {
  if (texts.empty()) throw Error(ErrorKind::Data, "cannot build inventory from an empty corpus");
  if (mode == Mode::Phoneme && (!lexicon || lexicon->empty()))
    throw Error(ErrorKind::Config, "phoneme mode requires a lexicon");
  std::set<std::string> found;
  std::set<std::string> missing;
  for (const auto& t : texts) {
    for (const auto& p : expand(segment(utf8::decode(t), mode), mode, lexicon, &missing))
      found.insert(p.symbol);
  }
  if (!missing.empty())
    throw Error(ErrorKind::Data, "lexicon does not cover: " + join(missing));
  std::vector<std::string> symbols{kPadSymbol, kEosSymbol};
  // std::set<std::string> orders by bytes, which for UTF-8 is code-point order.
  for (const auto& s : found) {
    if (s == kPadSymbol || s == kEosSymbol)
      throw Error(ErrorKind::Data, "text contains reserved symbol " + s);
    symbols.push_back(s);
  }
  return SymbolInventory(mode, std::move(symbols),
                         mode == Mode::Phoneme ? *lexicon : Lexicon{});
}

nlohmann::json SymbolInventory::to_json() const {
  nlohmann::json j;
  j["mode"] = to_string(mode_);
  j["symbols"] = symbols_;
  if (mode_ == Mode::Phoneme) j["lexicon"] = lexicon_.to_json();
  return j;
}

SymbolInventory SymbolInventory::from_json(const nlohmann::json& j) {
  try {
    const Mode mode = parse_mode(j.at("mode").get<std::string>());
    auto symbols = j.at("symbols").get<std::vector<std::string>>();
    if (symbols.size() < 2 || symbols[kPad] != kPadSymbol || symbols[kEos] != kEosSymbol)
      throw Error(ErrorKind::Format, "inventory must start with <pad>, <eos>");
    Lexicon lex = j.contains("lexicon") ? Lexicon::from_json(j.at("lexicon")) : Lexicon{};
    return SymbolInventory(mode, std::move(symbols), std::move(lex));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("inventory: ") + e.what());
  }
}

const std::string& SymbolInventory::symbol(std::size_t id) const {
  if (id >= symbols_.size())
    throw Error(ErrorKind::Data, "symbol id " + std::to_string(id) + " out of range");
  return symbols_[id];
}

std::optional<std::size_t> SymbolInventory::find(std::string_view symbol) const {
  if (auto it = index_.find(symbol); it != index_.end()) return it->second;
  return std::nullopt;
}

std::vector<double> LanguageMask::indicator(Lang lang) const {
  std::vector<double> out(langs.size());
  for (std::size_t i = 0; i < langs.size(); ++i) out[i] = langs[i] == lang ? 1.0 : 0.0;
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  const auto cps = utf8::decode(text);
  std::vector<char32_t> out;
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (utf8::is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(cp);
  }
  return utf8::encode(out);
}

SymbolSequence tokenize(std::string_view text, const SymbolInventory& inv) {
  const auto cps = utf8::decode(text);
  std::set<std::string> missing;
  const auto pieces = expand(segment(cps, inv.mode()), inv.mode(), &inv.lexicon(), &missing);
  if (!missing.empty())
    throw Error(ErrorKind::Data, "no lexicon entry for " + join(missing));
  const bool keep_space = inv.has_space();
  SymbolSequence seq;
  seq.source_text = std::string(text);
  for (const auto& p : pieces) {
    if (p.space && !keep_space) continue;
    const auto id = inv.find(p.symbol);
    if (!id)
      throw Error(ErrorKind::Data, "symbol '" + p.symbol + "' at offset " +
                                       std::to_string(p.offset) + " is not in the inventory");
    seq.ids.push_back(*id);
    seq.offsets.push_back(p.offset);
  }
  if (seq.ids.empty()) throw Error(ErrorKind::Data, "text is empty after normalization");
  seq.ids.push_back(SymbolInventory::kEos);
  return seq;
}

std::string detokenize(const SymbolSequence& seq, const SymbolInventory& inv) {
  std::string out;
  for (std::size_t i = 0; i < seq.content_length(); ++i) {
    if (inv.mode() == Mode::Phoneme && !out.empty()) out += ' ';
    out += inv.symbol(seq.ids[i]);
  }
  return out;
}

LanguageMask derive_language_mask(std::string_view text, const SymbolSequence& seq,
                                  const std::optional<std::vector<LangSpan>>& spans) {
  const auto cps = utf8::decode(text);
  if (seq.offsets.size() != seq.content_length())
    throw Error(ErrorKind::Data, "symbol sequence offsets do not match its ids");
  LanguageMask mask;
  mask.langs.reserve(seq.length());

  if (spans) {
    std::size_t cursor = 0;
    for (const auto& s : *spans) {
      if (s.start < cursor)
        throw Error(ErrorKind::Data, "language spans overlap at offset " + std::to_string(s.start));
      if (s.start > cursor || s.end <= s.start)
        throw Error(ErrorKind::Data, "language spans leave offset " + std::to_string(cursor) + " uncovered");
      cursor = s.end;
    }
    if (cursor != cps.size())
      throw Error(ErrorKind::Data, "language spans end at " + std::to_string(cursor) +
                                       " but text has " + std::to_string(cps.size()) + " code points");
    for (std::size_t off : seq.offsets) {
      auto it = std::find_if(spans->begin(), spans->end(),
                             [&](const LangSpan& s) { return off >= s.start && off < s.end; });
      mask.langs.push_back(it->lang);
    }
    mask.langs.push_back(mask.langs.empty() ? Lang::EN : mask.langs.back());
    return mask;
  }

  Lang last = Lang::EN;
  for (std::size_t off : seq.offsets) {
    if (off >= cps.size())
      throw Error(ErrorKind::Data, "symbol offset " + std::to_string(off) + " beyond text");
    const char32_t cp = cps[off];
    if (utf8::is_cjk(cp)) {
      last = Lang::CN;
    } else if (utf8::is_latin_alnum(cp)) {
      last = Lang::EN;
    }
    mask.langs.push_back(last);
  }
  mask.langs.push_back(last);
  return mask;
}

}  // namespace xtts::text
