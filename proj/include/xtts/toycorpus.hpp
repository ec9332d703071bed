#pragma once

// Synthetic "voices" for end-to-end runs without real recordings. Every symbol
// renders as a short harmonic tone whose spectral peak depends on the symbol
// and whose pitch, timbre, tempo, envelope depth and noise floor depend on the
// voice, so both text and speaker identity are visible in the mel spectrogram.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xtts/audio.hpp"

namespace xtts::toy {

struct Voice {
  std::string name;
  double pitch_hz = 140.0;
  double formant_scale = 1.0;   // stretches every symbol's spectral peak
  double tilt = 0.7;            // per-harmonic amplitude ratio of the voice's own colour
  double rate = 10.0;           // symbols per second
  double snr_db = 30.0;         // additive white noise relative to the voiced signal
  double envelope_depth = 0.8;  // 0 = flat amplitude, 1 = full dips between symbols
};

enum class Script { Mixed, ChineseOnly, EnglishOnly };

// The toy alphabets: eight CJK characters and the letters a-h.
const std::vector<std::string>& chinese_symbols();
const std::vector<std::string>& english_symbols();

// Random sentence of 2-4 words; Mixed alternates CJK runs and Latin words.
std::string random_text(Script script, std::mt19937_64& gen);

// Renders `text` with noise-only padding on both sides (8% of the voiced length, at
// least 40 ms each); samples stay in [-1, 1].
audio::Waveform render(std::string_view text, const Voice& voice, std::uint64_t seed, int sample_rate = 16000);

struct CorpusSpec {
  std::size_t found_speakers = 2;   // code-switched
  std::size_t target_speakers = 2;  // alternating Chinese-only and English-only
  std::size_t utterances_per_speaker = 12;
  bool plant_defects = false;  // first found utterances get a noise, tempo or flatness defect
  std::uint64_t seed = 42;
  int sample_rate = 16000;
};

struct CorpusFiles {
  std::filesystem::path found_manifest;
  std::filesystem::path target_manifest;
  std::filesystem::path config;
};

// Writes wavs/, found.jsonl, target.jsonl and a small-model run config.json under `dir`.
CorpusFiles write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec);

std::vector<Voice> default_voices(const CorpusSpec& spec);

// Audio analysis settings sized for toy runs (20 mel bins, 20 ms hop).
audio::StftConfig toy_stft();
// Run config (model, train, audio sections) for toy runs.
nlohmann::json toy_run_config();

}  // namespace xtts::toy
