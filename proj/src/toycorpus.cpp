#include "xtts/toycorpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "xtts/datasel.hpp"
#include "xtts/error.hpp"
#include "xtts/utf8.hpp"

namespace xtts::toy {
namespace fs = std::filesystem;

namespace {

double unit(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

double gaussian(std::mt19937_64& gen) {
  const double u1 = 1.0 - unit(gen);  // (0, 1]
  const double u2 = unit(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t pick(std::mt19937_64& gen, std::size_t n) { return static_cast<std::size_t>(gen() % n); }

// Index into the 16-symbol toy alphabet; -1 for spaces and anything else.
int symbol_index(const std::string& s) {
  const auto& cn = chinese_symbols();
  const auto& en = english_symbols();
  if (auto it = std::find(cn.begin(), cn.end(), s); it != cn.end()) return static_cast<int>(it - cn.begin());
  if (auto it = std::find(en.begin(), en.end(), s); it != en.end()) return 8 + static_cast<int>(it - en.begin());
  return -1;
}

std::string word(const std::vector<std::string>& alphabet, std::mt19937_64& gen) {
  std::string w;
  const std::size_t len = 2 + pick(gen, 2);
  for (std::size_t i = 0; i < len; ++i) w += alphabet[pick(gen, alphabet.size())];
  return w;
}

}  // namespace

const std::vector<std::string>& chinese_symbols() {
  static const std::vector<std::string> s = {"你", "好", "我", "是", "中", "文", "的", "人"};
  return s;
}

const std::vector<std::string>& english_symbols() {
  static const std::vector<std::string> s = {"a", "b", "c", "d", "e", "f", "g", "h"};
  return s;
}

std::string random_text(Script script, std::mt19937_64& gen) {
  const std::size_t words = 2 + pick(gen, 2);
  std::string out;
  bool prev_en = false;
  bool cn_turn = pick(gen, 2) == 0;
  for (std::size_t i = 0; i < words; ++i) {
    const bool cn = script == Script::ChineseOnly || (script == Script::Mixed && cn_turn);
    if (i > 0 && (!cn || prev_en)) out += ' ';
    out += word(cn ? chinese_symbols() : english_symbols(), gen);
    prev_en = !cn;
    cn_turn = !cn_turn;
  }
  return out;
}

audio::Waveform render(std::string_view text, const Voice& voice, std::uint64_t seed, int sample_rate) {
  if (voice.rate <= 0 || voice.pitch_hz <= 0) throw Error(ErrorKind::Config, "toy voice needs positive rate and pitch");
  std::vector<std::string> symbols;
  for (char32_t cp : utf8::decode(text)) symbols.push_back(utf8::encode(cp));
  if (symbols.empty()) throw Error(ErrorKind::Data, "toy render: empty text");

  const double sr = sample_rate;
  const auto seg = static_cast<std::size_t>(std::lround(sr / voice.rate));
  std::vector<double> voiced(symbols.size() * seg, 0.0);
  // Padding scales with the utterance so noise-only frames make up about the
  // lowest energy decile, whatever the length.
  const auto pad = std::max(static_cast<std::size_t>(std::lround(0.04 * sr)),
                            static_cast<std::size_t>(std::lround(0.08 * static_cast<double>(voiced.size()))));
  // Word gaps keep the previous symbol's colour at the envelope's dip level,
  // so a flat (depth 0) voice runs words together.
  std::vector<int> index(symbols.size());
  int last = 0;
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    const int k = symbol_index(symbols[s]);
    index[s] = k;
    if (k >= 0) last = k;
    else index[s] = -1 - last;
  }
  double phase = 0.0;
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    const bool gap = index[s] < 0;
    const int k = gap ? -1 - index[s] : index[s];
    const double formant = (400.0 + 180.0 * k) * voice.formant_scale;
    const double gain_db = -6.0 * voice.envelope_depth * ((k * 5) % 7) / 6.0;
    const double gain = std::pow(10.0, gain_db / 20.0);
    const double pitch = voice.pitch_hz * (1.0 + 0.02 * ((k * 3) % 5 - 2));
    std::vector<double> amps;
    for (int h = 1; h * pitch < 0.45 * sr && h <= 40; ++h) {
      const double f = h * pitch;
      const double peak = std::exp(-std::pow((f - formant) / 250.0, 2.0));
      amps.push_back(peak + 0.4 * std::pow(voice.tilt, h - 1));
    }
    for (std::size_t i = 0; i < seg; ++i) {
      const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(seg);
      const double env = gap ? 1.0 - voice.envelope_depth
                             : (1.0 - voice.envelope_depth) + voice.envelope_depth * std::sin(std::numbers::pi * u);
      phase += 2.0 * std::numbers::pi * pitch / sr;
      double v = 0.0;
      for (std::size_t h = 0; h < amps.size(); ++h) v += amps[h] * std::sin(static_cast<double>(h + 1) * phase);
      voiced[s * seg + i] = gain * env * v;
    }
  }
  const double peak = std::max(1e-12, std::abs(*std::max_element(voiced.begin(), voiced.end(), [](double a, double b) {
    return std::abs(a) < std::abs(b);
  })));
  double power = 0.0;
  for (double& v : voiced) {
    v *= 0.5 / peak;
    power += v * v;
  }
  power /= static_cast<double>(voiced.size());
  const double sigma = std::sqrt(power / std::pow(10.0, voice.snr_db / 10.0));

  std::mt19937_64 gen(seed);
  audio::Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(voiced.size() + 2 * pad, 0.0);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double clean = (i >= pad && i < pad + voiced.size()) ? voiced[i - pad] : 0.0;
    w.samples[i] = std::clamp(clean + sigma * gaussian(gen), -1.0, 1.0);
  }
  return w;
}

std::vector<Voice> default_voices(const CorpusSpec& spec) {
  std::vector<Voice> v;
  for (std::size_t i = 0; i < spec.found_speakers; ++i) {
    Voice x;
    x.name = "found" + std::to_string(i + 1);
    x.pitch_hz = 110.0 + 70.0 * static_cast<double>(i % 3);
    x.formant_scale = 0.85 + 0.12 * static_cast<double>(i % 4);
    x.tilt = 0.55 + 0.1 * static_cast<double>(i % 3);
    x.rate = 9.0 + static_cast<double>(i % 3);
    x.snr_db = 24.0;
    x.envelope_depth = 0.7;
    v.push_back(x);
  }
  for (std::size_t i = 0; i < spec.target_speakers; ++i) {
    Voice x;
    x.name = "target" + std::to_string(i + 1);
    x.pitch_hz = 150.0 + 60.0 * static_cast<double>(i % 3) + 15.0;
    x.formant_scale = 1.25 - 0.15 * static_cast<double>(i % 3);
    x.tilt = 0.85 - 0.1 * static_cast<double>(i % 3);
    x.rate = 10.0;
    x.snr_db = 35.0;
    x.envelope_depth = 0.85;
    v.push_back(x);
  }
  return v;
}

audio::StftConfig toy_stft() {
  audio::StftConfig c;
  c.sample_rate = 16000;
  c.fft_size = 512;
  c.hop = 320;
  c.win_length = 400;
  c.mel_bins = 20;
  c.fmin = 0.0;
  c.fmax = 8000.0;
  return c;
}

nlohmann::json toy_run_config() {
  return {{"seed", 42},
          {"audio", toy_stft().to_json()},
          {"model",
           {{"encoder_kind", "spe"},
            {"symbol_embed_dim", 16},
            {"encoder_hidden", 16},
            {"encoder_kernel", 5},
            {"speaker_embed_dim", 8},
            {"attention_mixtures", 3},
            {"attention_rnn_dim", 32},
            {"decoder_rnn_dim", 48},
            {"mel_bins", 20},
            {"reduction_factor", 2},
            {"postnet_channels", 24},
            {"max_decoder_steps", 60}}},
          {"train",
           {{"batch_size", 4},
            {"lr_initial", 3e-3},
            {"lr_floor", 1e-3},
            {"pretrain_steps", 200},
            {"finetune_max_steps", 200},
            {"validate_every", 25},
            {"early_stop_patience", 5},
            {"validation_fraction", 0.1}}}};
}

CorpusFiles write_corpus(const fs::path& dir, const CorpusSpec& spec) {
  fs::create_directories(dir / "wavs");
  const auto voices = default_voices(spec);
  std::mt19937_64 gen(spec.seed);
  datasel::Manifest found, target;
  found.root = target.root = dir;
  static const char* kDefects[] = {"noise", "rate", "flat"};
  for (std::size_t vi = 0; vi < voices.size(); ++vi) {
    const bool is_found = vi < spec.found_speakers;
    const Script script = is_found ? Script::Mixed
                                   : ((vi - spec.found_speakers) % 2 == 0 ? Script::ChineseOnly : Script::EnglishOnly);
    for (std::size_t u = 0; u < spec.utterances_per_speaker; ++u) {
      Voice v = voices[vi];
      // Small per-utterance variation so quality metrics spread.
      v.rate *= 1.0 + 0.06 * (unit(gen) - 0.5);
      v.snr_db += 3.0 * (unit(gen) - 0.5);
      v.envelope_depth = std::clamp(v.envelope_depth + 0.1 * (unit(gen) - 0.5), 0.0, 1.0);
      std::string defect;
      if (spec.plant_defects && is_found && u == 0) {
        defect = kDefects[vi % 3];
        if (defect == "noise") v.snr_db = 3.0;
        if (defect == "rate") v.rate *= 2.2;
        if (defect == "flat") v.envelope_depth = 0.0;
      }
      datasel::Record r;
      r.id = v.name + "_" + (u < 9 ? "0" : "") + std::to_string(u + 1);
      r.audio = "wavs/" + r.id + ".wav";
      r.text = random_text(script, gen);
      r.speaker = v.name;
      r.provenance = is_found ? datasel::Provenance::Found : datasel::Provenance::Target;
      if (!defect.empty()) r.extra["planted"] = defect;
      audio::wav_write(dir / r.audio, render(r.text, v, gen(), spec.sample_rate));
      (is_found ? found : target).records.push_back(std::move(r));
    }
  }
  CorpusFiles files{dir / "found.jsonl", dir / "target.jsonl", dir / "config.json"};
  datasel::write_manifest(files.found_manifest, found);
  datasel::write_manifest(files.target_manifest, target);
  std::ofstream(files.config) << toy_run_config().dump(2) << '\n';
  return files;
}

}  // namespace xtts::toy
