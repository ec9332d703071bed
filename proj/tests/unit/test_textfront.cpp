#include <gtest/gtest.h>

#include <random>

#include "xtts/error.hpp"
#include "xtts/text.hpp"
#include "xtts/utf8.hpp"

using namespace xtts;
using namespace xtts::text;

namespace {

SymbolInventory chars(std::vector<std::string> texts) { return SymbolInventory::build(texts, Mode::Character); }

std::vector<Lang> langs(std::string_view s, const SymbolInventory& inv) {
  return derive_language_mask(s, tokenize(s, inv)).langs;
}

template <class Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no xtts::Error thrown";
  return ErrorKind::State;
}

constexpr Lang CN = Lang::CN;
constexpr Lang EN = Lang::EN;

}  // namespace

TEST(Inventory, AsciiCorpus) {
  auto inv = chars({"ab", "ba"});
  EXPECT_EQ(inv.symbols(), (std::vector<std::string>{"<pad>", "<eos>", "a", "b"}));
  EXPECT_EQ(inv.size(), 4u);
  EXPECT_EQ(SymbolInventory::kPad, 0u);
  EXPECT_EQ(SymbolInventory::kEos, 1u);
}

TEST(Inventory, CjkCorpus) {
  auto inv = chars({"你好"});
  ASSERT_EQ(inv.size(), 4u);
  EXPECT_EQ(inv.symbol(2), "你");
  EXPECT_EQ(inv.symbol(3), "好");
}

TEST(Inventory, OrderedByCodePoint) {
  auto inv = chars({"好b你 a"});
  EXPECT_EQ(inv.symbols(), (std::vector<std::string>{"<pad>", "<eos>", " ", "a", "b", "你", "好"}));
}

TEST(Inventory, DeterministicAndRoundTrips) {
  auto a = chars({"hello 世界", "abc"});
  auto b = chars({"abc", "hello 世界"});
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  auto c = SymbolInventory::from_json(nlohmann::json::parse(a.to_json().dump()));
  EXPECT_EQ(a, c);
}

TEST(Inventory, EmptyCorpusRejected) {
  EXPECT_EQ(kind_of([] { chars({}); }), ErrorKind::Data);
}

TEST(Inventory, PhonemeModeNeedsLexicon) {
  std::vector<std::string> texts = {"hi"};
  EXPECT_EQ(kind_of([&] { SymbolInventory::build(texts, Mode::Phoneme); }), ErrorKind::Config);
}

TEST(Inventory, PhonemeModeListsUncoveredWord) {
  auto lex = Lexicon::parse("hello\thh ah l ow\n你\tn i3\n");
  std::vector<std::string> texts = {"hello 你 world"};
  try {
    SymbolInventory::build(texts, Mode::Phoneme, &lex);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
    EXPECT_NE(std::string(e.what()).find("world"), std::string::npos) << e.what();
  }
}

TEST(Inventory, PhonemeModeTokenizes) {
  auto lex = Lexicon::parse("hello\thh ah l ow\n你\tn i3\n");
  std::vector<std::string> texts = {"你Hello"};
  auto inv = SymbolInventory::build(texts, Mode::Phoneme, &lex);
  for (const char* s : {"hh", "ah", "l", "ow", "n", "i3"}) EXPECT_TRUE(inv.find(s)) << s;
  auto seq = tokenize("你Hello", inv);
  EXPECT_EQ(seq.length(), 7u);
  EXPECT_EQ(detokenize(seq, inv), "n i3 hh ah l ow");
  auto restored = SymbolInventory::from_json(inv.to_json());
  EXPECT_EQ(restored, inv);
}

TEST(Tokenize, Lookup) {
  auto inv = chars({"ab", "ba"});
  EXPECT_EQ(tokenize("ab", inv).ids, (std::vector<std::size_t>{2, 3, 1}));
}

TEST(Tokenize, EmptyAfterNormalization) {
  auto inv = chars({"ab"});
  EXPECT_EQ(kind_of([&] { tokenize("", inv); }), ErrorKind::Data);
  EXPECT_EQ(kind_of([&] { tokenize("  \t ", inv); }), ErrorKind::Data);
}

TEST(Tokenize, OutOfInventoryNamesSymbolAndOffset) {
  auto inv = chars({"ab"});
  try {
    tokenize("ax", inv);
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'x'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("offset 1"), std::string::npos) << msg;
  }
}

TEST(Tokenize, WhitespaceCollapsesOrDrops) {
  auto with_space = chars({"a b"});
  auto seq = tokenize("  a \t\n b ", with_space);
  EXPECT_EQ(seq.ids, (std::vector<std::size_t>{3, 2, 4, 1}));
  auto without = chars({"ab"});
  EXPECT_EQ(tokenize("a   b", without).ids, (std::vector<std::size_t>{2, 3, 1}));
}

TEST(Tokenize, ExactlyOneEosAtEnd) {
  auto inv = chars({"你好 hello, world"});
  auto seq = tokenize("hello,你好 world", inv);
  EXPECT_EQ(seq.ids.back(), SymbolInventory::kEos);
  EXPECT_EQ(std::count(seq.ids.begin(), seq.ids.end(), SymbolInventory::kEos), 1);
  for (auto id : seq.ids) EXPECT_LT(id, inv.size());
}

TEST(Tokenize, DetokenizeReproducesNormalizedText) {
  auto inv = chars({"你好 hello, world!"});
  for (const char* s : {"hello   world", " 你好, hello ", "w\to\nr l d!"}) {
    EXPECT_EQ(detokenize(tokenize(s, inv), inv), normalize_whitespace(s)) << s;
  }
}

TEST(LanguageMask, MixedScript) {
  auto inv = chars({"你好hi"});
  EXPECT_EQ(langs("你好hi", inv), (std::vector<Lang>{CN, CN, EN, EN, EN}));
}

TEST(LanguageMask, AllEnglish) {
  auto inv = chars({"abc"});
  EXPECT_EQ(langs("abc", inv), (std::vector<Lang>{EN, EN, EN, EN}));
}

TEST(LanguageMask, PunctuationAndSpaceInheritFromLeft) {
  // The comma and the space follow 你, the nearest content symbol, so both are CN.
  auto with_space = chars({"你, a"});
  EXPECT_EQ(langs("你, a", with_space), (std::vector<Lang>{CN, CN, CN, EN, EN}));
  // Without a space symbol the space is dropped.
  auto without = chars({"你,a"});
  EXPECT_EQ(langs("你, a", without), (std::vector<Lang>{CN, CN, EN, EN}));
}

TEST(LanguageMask, LeadingPunctuationDefaultsToEnglish) {
  auto inv = chars({"!你"});
  EXPECT_EQ(langs("!你", inv), (std::vector<Lang>{EN, CN, CN}));
}

TEST(LanguageMask, ExplicitSpans) {
  auto inv = chars({"ab"});
  const std::string s = "abba";
  auto seq = tokenize(s, inv);
  std::vector<LangSpan> spans = {{CN, 0, 2}, {EN, 2, 4}};
  EXPECT_EQ(derive_language_mask(s, seq, spans).langs, (std::vector<Lang>{CN, CN, EN, EN, EN}));
  std::vector<LangSpan> gap = {{CN, 0, 1}, {EN, 2, 4}};
  EXPECT_EQ(kind_of([&] { derive_language_mask(s, seq, gap); }), ErrorKind::Data);
  std::vector<LangSpan> overlap = {{CN, 0, 3}, {EN, 2, 4}};
  EXPECT_EQ(kind_of([&] { derive_language_mask(s, seq, overlap); }), ErrorKind::Data);
  std::vector<LangSpan> short_cover = {{CN, 0, 3}};
  EXPECT_EQ(kind_of([&] { derive_language_mask(s, seq, short_cover); }), ErrorKind::Data);
}

TEST(LanguageMask, PartitionHoldsOnRandomMixedStrings) {
  const std::vector<std::string> alphabet = {"你", "好", "中", "a", "b", "Z", "7", ",", "!", " ", "  ", "é"};
  std::string all;
  for (const auto& a : alphabet) all += a;
  auto inv = chars({all});
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const auto len = 1 + gen() % 15;
    for (std::size_t i = 0; i < len; ++i) s += alphabet[gen() % alphabet.size()];
    if (normalize_whitespace(s).empty()) continue;
    auto seq = tokenize(s, inv);
    auto mask = derive_language_mask(s, seq);
    ASSERT_EQ(mask.size(), seq.length()) << s;
    const auto cn = mask.indicator(CN);
    const auto en = mask.indicator(EN);
    for (std::size_t j = 0; j < mask.size(); ++j) EXPECT_EQ(cn[j] + en[j], 1.0);
    EXPECT_EQ(mask.langs, derive_language_mask(s, seq).langs);
  }
}

TEST(Utf8, RejectsMalformed) {
  EXPECT_EQ(kind_of([] { utf8::decode("\xff"); }), ErrorKind::Data);
  EXPECT_EQ(kind_of([] { utf8::decode("\xe4\xbd"); }), ErrorKind::Data);
  EXPECT_EQ(utf8::encode(utf8::decode("a你é")), "a你é");
}

TEST(Lexicon, CaseFallbackAndMalformedLine) {
  auto lex = Lexicon::parse("hello\thh ah\n");
  ASSERT_NE(lex.find("HELLO"), nullptr);
  EXPECT_EQ(*lex.find("HELLO"), (std::vector<std::string>{"hh", "ah"}));
  EXPECT_EQ(lex.find("bye"), nullptr);
  EXPECT_EQ(kind_of([] { Lexicon::parse("no tab here\n"); }), ErrorKind::Format);
}
