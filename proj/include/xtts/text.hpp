#pragma once

// Text front end: mixed-script text to symbol ids plus a per-symbol language
// mask. Character mode treats each code point as a symbol; phoneme mode maps
// words through a user-supplied lexicon.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace xtts::text {

enum class Mode { Character, Phoneme };
enum class Lang : std::uint8_t { CN = 0, EN = 1 };

const char* to_string(Mode mode);
const char* to_string(Lang lang);
Mode parse_mode(std::string_view name);  // "char"/"character"/"phoneme"
Lang parse_lang(std::string_view name);  // "CN"/"EN", case-insensitive

// word<TAB>ph1 ph2 ... per line.
class Lexicon {
 public:
  static Lexicon parse(std::string_view contents);
  static Lexicon load(const std::filesystem::path& path);

  // Exact match first, then ASCII-lowercased.
  const std::vector<std::string>* find(std::string_view word) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  nlohmann::json to_json() const;
  static Lexicon from_json(const nlohmann::json& j);

  friend bool operator==(const Lexicon&, const Lexicon&) = default;

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

class SymbolInventory {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kEos = 1;
  static constexpr const char* kPadSymbol = "<pad>";
  static constexpr const char* kEosSymbol = "<eos>";

  SymbolInventory() = default;

  // Deterministic: content symbols sorted by code point (byte order of UTF-8).
  // Phoneme mode requires a lexicon and fails listing every uncovered word.
  static SymbolInventory build(std::span<const std::string> texts, Mode mode,
                               const Lexicon* lexicon = nullptr);

  static SymbolInventory from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::size_t size() const { return symbols_.size(); }
  Mode mode() const { return mode_; }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::string& symbol(std::size_t id) const;
  std::optional<std::size_t> find(std::string_view symbol) const;
  bool has_space() const { return find(" ").has_value(); }
  const Lexicon& lexicon() const { return lexicon_; }

  friend bool operator==(const SymbolInventory& a, const SymbolInventory& b) {
    return a.mode_ == b.mode_ && a.symbols_ == b.symbols_ &&
           a.lexicon_ == b.lexicon_;
  }

 private:
  SymbolInventory(Mode mode, std::vector<std::string> symbols, Lexicon lexicon);

  Mode mode_ = Mode::Character;
  std::vector<std::string> symbols_;
  std::map<std::string, std::size_t, std::less<>> index_;
  Lexicon lexicon_;
};

struct SymbolSequence {
  std::vector<std::size_t> ids;      // ends with kEos
  std::vector<std::size_t> offsets;  // code-point offset into source_text, one per non-eos id
  std::string source_text;

  std::size_t length() const { return ids.size(); }
  std::size_t content_length() const { return ids.empty() ? 0 : ids.size() - 1; }
};

struct LangSpan {
  Lang lang = Lang::EN;
  std::size_t start = 0;  // code points, half-open
  std::size_t end = 0;
};

struct LanguageMask {
  std::vector<Lang> langs;

  std::size_t size() const { return langs.size(); }
  // 1 where the symbol belongs to `lang`, else 0. Indicators of CN and EN sum to 1.
  std::vector<double> indicator(Lang lang) const;
};

// Whitespace runs collapse to one space; leading/trailing whitespace is dropped.
std::string normalize_whitespace(std::string_view text);

SymbolSequence tokenize(std::string_view text, const SymbolInventory& inv);

// Character mode reproduces the normalized text; phoneme mode joins symbols with spaces.
std::string detokenize(const SymbolSequence& seq, const SymbolInventory& inv);

// Explicit spans, when given, must tile [0, text length) in order. Otherwise
// CJK code points are CN, Latin letters/digits EN, and everything else inherits
// the language of the nearest preceding content symbol (EN if none). The eos
// position takes the language of the last symbol before it.
LanguageMask derive_language_mask(std::string_view text, const SymbolSequence& seq,
                                  const std::optional<std::vector<LangSpan>>& spans = std::nullopt);

}  // namespace xtts::text
