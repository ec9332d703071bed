#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "support.hpp"
#include "xtts/datasel.hpp"
#include "xtts/error.hpp"
#include "xtts/toycorpus.hpp"

using namespace xtts;
using namespace xtts::datasel;
using xtts::testing::TempDir;

namespace {

Record rec(std::string id, std::string speaker, double snr, double rate, double artic) {
  Record r;
  r.id = std::move(id);
  r.audio = r.id + ".wav";
  r.text = "ab";
  r.speaker = std::move(speaker);
  r.metrics = audio::QualityMetrics{snr, rate, artic};
  return r;
}

std::vector<std::string> dropped(const Manifest& m) {
  std::vector<std::string> out;
  for (const auto& r : m.records)
    if (r.kept == false) out.push_back(r.id);
  std::sort(out.begin(), out.end());
  return out;
}

// Independent composite: mean of population z-scores of (-snr, rate, -articulation).
std::vector<double> oracle_composite(const std::vector<std::array<double, 3>>& metrics) {
  const std::size_t n = metrics.size();
  std::vector<double> out(n, 0.0);
  for (int k = 0; k < 3; ++k) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = k == 1 ? metrics[i][k] : -metrics[i][k];
    double mean = 0;
    for (double x : v) mean += x / static_cast<double>(n);
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out[i] += (v[i] - mean) / std::sqrt(var) / 3.0;
  }
  return out;
}

const std::vector<std::array<double, 3>> kFixture = {
    {22.0, 4.1, 6.0}, {18.5, 4.4, 5.2}, {25.1, 3.9, 6.8}, {12.0, 5.9, 4.1}, {20.2, 4.0, 5.9},
    {23.3, 4.6, 6.1}, {19.9, 5.0, 5.5}, {21.7, 4.2, 3.0}, {24.0, 3.7, 6.4}, {17.4, 4.8, 5.0},
};

Manifest fixture_manifest(const std::string& speaker = "s") {
  Manifest m;
  for (std::size_t i = 0; i < kFixture.size(); ++i)
    m.records.push_back(rec("u" + std::to_string(i), speaker, kFixture[i][0], kFixture[i][1], kFixture[i][2]));
  return m;
}

}  // namespace

TEST(ManifestIo, RoundTripPreservesUnknownFields) {
  const std::string line =
      R"({"id":"a","audio":"w/a.wav","text":"hi","speaker":"s","lang_spans":[{"lang":"EN","start":0,"end":2}],)"
      R"("metrics":{"snr_db":"inf","speaking_rate":2.5,"articulation":3.0},"kept":false,"note":{"x":[1,2]}})";
  auto m = parse_manifest(line + "\n", "/data");
  ASSERT_EQ(m.records.size(), 1u);
  const auto& r = m.records[0];
  EXPECT_TRUE(std::isinf(r.metrics->snr_db));
  ASSERT_TRUE(r.lang_spans);
  EXPECT_EQ((*r.lang_spans)[0].end, 2u);
  EXPECT_EQ(r.kept, false);
  EXPECT_EQ(r.extra.at("note").at("x")[1], 2);
  auto again = parse_manifest(serialize_manifest(m, "/data"), "/data");
  EXPECT_EQ(record_to_json(again.records[0]), record_to_json(r));
  EXPECT_EQ(resolve_audio(m, r), std::filesystem::path("/data/w/a.wav"));
}

TEST(ManifestIo, DuplicateIdAndMissingFieldNameTheLine) {
  const std::string a = R"({"id":"a","audio":"a.wav","text":"x","speaker":"s"})";
  try {
    parse_manifest(a + "\n" + a + "\n", ".");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_manifest(R"({"id":"a","audio":"a.wav","text":"x"})", "."), Error);
  EXPECT_THROW(parse_manifest("{not json", "."), Error);
}

TEST(ManifestIo, WriteRebasesAudioPaths) {
  TempDir dir("manifest");
  Manifest m;
  m.root = dir.path() / "corpus";
  m.records.push_back(rec("a", "s", 1, 1, 1));
  std::filesystem::create_directories(dir / "out");
  write_manifest(dir / "out" / "m.jsonl", m);
  auto back = read_manifest(dir / "out" / "m.jsonl");
  EXPECT_EQ(back.records[0].audio, "../corpus/a.wav");
  EXPECT_EQ(resolve_audio(back, back.records[0]), (dir.path() / "corpus" / "a.wav").lexically_normal());
}

class Scoring : public ::testing::Test {
 protected:
  void SetUp() override {
    toy::CorpusSpec spec;
    spec.found_speakers = 1;
    spec.target_speakers = 0;
    spec.utterances_per_speaker = 10;
    files = toy::write_corpus(dir.path(), spec);
    m = read_manifest(files.found_manifest);
    std::vector<std::string> texts;
    for (const auto& r : m.records) texts.push_back(r.text);
    inv = text::SymbolInventory::build(texts, text::Mode::Character);
  }
  TempDir dir{"scoring"};
  toy::CorpusFiles files;
  Manifest m;
  text::SymbolInventory inv;
  audio::StftConfig cfg = toy::toy_stft();
};

TEST_F(Scoring, FillsEveryRecordRepeatably) {
  auto a = m, b = m;
  auto rep = score_corpus(a, inv, cfg);
  score_corpus(b, inv, cfg);
  EXPECT_EQ(rep.scored, 10u);
  EXPECT_TRUE(rep.warnings.empty());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    ASSERT_TRUE(a.records[i].metrics);
    EXPECT_EQ(a.records[i].metrics->snr_db, b.records[i].metrics->snr_db);
    EXPECT_EQ(a.records[i].metrics->speaking_rate, b.records[i].metrics->speaking_rate);
    EXPECT_EQ(a.records[i].metrics->articulation, b.records[i].metrics->articulation);
    EXPECT_GT(a.records[i].metrics->speaking_rate, 0.0);
  }
}

TEST_F(Scoring, UnreadableFileIsFlaggedNotFatal) {
  std::filesystem::remove(resolve_audio(m, m.records[3]));
  auto rep = score_corpus(m, inv, cfg);
  EXPECT_EQ(rep.scored, 9u);
  ASSERT_EQ(rep.warnings.size(), 1u);
  EXPECT_TRUE(m.records[3].unscorable);
  EXPECT_FALSE(m.records[3].score_error.empty());
  filter_corpus(m, 0.1);
  EXPECT_EQ(dropped(m), std::vector<std::string>{m.records[3].id});
}

TEST_F(Scoring, SilentRecordHitsTheSentinel) {
  audio::wav_write(resolve_audio(m, m.records[0]), audio::Waveform{std::vector<double>(16000, 0.0), 16000});
  auto rep = score_corpus(m, inv, cfg);
  EXPECT_EQ(rep.scored, 9u);
  EXPECT_TRUE(m.records[0].unscorable);
  ASSERT_TRUE(m.records[0].metrics);
  EXPECT_TRUE(std::isinf(m.records[0].metrics->snr_db));
}

TEST(Filter, DropsTheMaxCompositeRecord) {
  auto m = fixture_manifest();
  const auto oracle = oracle_composite(kFixture);
  const auto worst = static_cast<std::size_t>(std::max_element(oracle.begin(), oracle.end()) - oracle.begin());
  filter_corpus(m, 0.10);
  EXPECT_EQ(dropped(m), std::vector<std::string>{"u" + std::to_string(worst)});
  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), 0);
  const auto mine = composite_scores(m, all);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(mine[i], oracle[i], 1e-12);
}

TEST(Filter, ZeroFractionKeepsEverything) {
  auto m = fixture_manifest();
  filter_corpus(m, 0.0);
  EXPECT_TRUE(dropped(m).empty());
  for (const auto& r : m.records) EXPECT_EQ(r.kept, true);
}

TEST(Filter, FractionOutsideRangeRejected) {
  auto m = fixture_manifest();
  for (double f : {1.0, -0.1, 1.5}) {
    try {
      filter_corpus(m, f);
      FAIL() << f;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Usage);
    }
  }
}

TEST(Filter, TieAtTheCutKeepsLowerId) {
  Manifest m;
  m.records = {rec("b", "s", 10, 4, 5), rec("a", "s", 10, 4, 5), rec("c", "s", 30, 3, 8), rec("d", "s", 30, 3, 8)};
  filter_corpus(m, 0.25);
  EXPECT_EQ(dropped(m), std::vector<std::string>{"b"});
}

TEST(Filter, NeverDropsAWholeSpeaker) {
  Manifest m;
  m.records = {rec("a", "solo", 1, 9, 0), rec("b", "pair", 1, 1, 1), rec("c", "pair", 2, 2, 2)};
  filter_corpus(m, 0.99);
  std::size_t solo = 0, pair = 0;
  for (const auto& r : m.records)
    if (r.kept != false) (r.speaker == "solo" ? solo : pair)++;
  EXPECT_EQ(solo, 1u);
  EXPECT_EQ(pair, 1u);
}

TEST(Filter, PerSpeakerAndOrderInvariant) {
  auto m = fixture_manifest("x");
  for (auto r : fixture_manifest("y").records) {
    r.id = "y" + r.id;
    m.records.push_back(r);
  }
  auto base = m;
  filter_corpus(base, 0.2);
  EXPECT_EQ(dropped(base).size(), 4u);
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 5; ++trial) {
    auto shuffled = m;
    std::shuffle(shuffled.records.begin(), shuffled.records.end(), gen);
    filter_corpus(shuffled, 0.2);
    EXPECT_EQ(dropped(shuffled), dropped(base));
  }
}

TEST(Filter, AffineRescalingOfOneMetricKeepsPartition) {
  auto m = fixture_manifest();
  auto base = m;
  filter_corpus(base, 0.3);
  for (auto& r : m.records) r.metrics->speaking_rate = 3.7 * r.metrics->speaking_rate - 11.0;
  auto scaled = m;
  filter_corpus(scaled, 0.3);
  EXPECT_EQ(dropped(scaled), dropped(base));
}

TEST(TopSpeakers, KeepsBestMeanComposite) {
  Manifest m;
  m.records = {rec("a1", "good", 30, 3, 8), rec("a2", "good", 28, 3, 7), rec("b1", "bad", 5, 7, 2),
               rec("b2", "bad", 6, 6, 2), rec("c1", "mid", 18, 4, 5), rec("c2", "mid", 17, 4, 5)};
  auto one = m;
  select_top_speakers(one, 1);
  for (const auto& r : one.records) EXPECT_EQ(r.kept, r.speaker == "good") << r.id;
  select_top_speakers(m, 2);
  for (const auto& r : m.records) EXPECT_EQ(r.kept, r.speaker != "bad") << r.id;
  EXPECT_THROW(select_top_speakers(m, 0), Error);
}

TEST(Merge, CountsProvenanceAndIdentity) {
  Manifest found, target;
  found.root = target.root = "/c";
  for (int i = 0; i < 33; ++i) found.records.push_back(rec("f" + std::to_string(i), "fs" + std::to_string(i % 3), 1, 1, 1));
  for (int i = 0; i < 10; ++i) target.records.push_back(rec("t" + std::to_string(i), i < 5 ? "ta" : "tb", 1, 1, 1));
  auto merged = merge_manifests(found, target, "/c");
  EXPECT_EQ(merged.records.size(), 43u);
  EXPECT_EQ(merged.records.front().provenance, Provenance::Found);
  EXPECT_EQ(merged.records.back().provenance, Provenance::Target);

  auto only_target = merge_manifests(Manifest{{}, "/c"}, target, "/c");
  ASSERT_EQ(only_target.records.size(), target.records.size());
  for (std::size_t i = 0; i < target.records.size(); ++i) {
    auto expect = target.records[i];
    expect.provenance = Provenance::Target;
    EXPECT_EQ(record_to_json(only_target.records[i]), record_to_json(expect));
  }
}

TEST(Merge, DuplicateIdAndSharedSpeakerRejected) {
  Manifest found, target;
  found.records = {rec("u1", "a", 1, 1, 1)};
  target.records = {rec("u1", "b", 1, 1, 1)};
  try {
    merge_manifests(found, target, ".");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("u1"), std::string::npos);
  }
  target.records = {rec("u2", "a", 1, 1, 1)};
  EXPECT_THROW(merge_manifests(found, target, "."), Error);
}
