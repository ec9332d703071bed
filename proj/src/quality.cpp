#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "xtts/audio.hpp"
#include "xtts/error.hpp"

namespace xtts::audio {
namespace {

constexpr std::size_t kMinFrames = 20;

std::size_t decile_count(std::size_t n) { return std::max<std::size_t>(1, n / 10); }

}  // namespace

double estimate_snr(const Waveform& w, const StftConfig& cfg) {
  const std::size_t frames = w.samples.size() / cfg.hop;
  if (frames < kMinFrames)
    throw Error(ErrorKind::Data, "SNR needs at least " + std::to_string(kMinFrames) + " frames, got " +
                                     std::to_string(frames));
  std::vector<double> energy(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double e = 0.0;
    for (std::size_t i = 0; i < cfg.hop; ++i) {
      const double s = w.samples[f * cfg.hop + i];
      e += s * s;
    }
    energy[f] = e / static_cast<double>(cfg.hop);
  }
  std::sort(energy.begin(), energy.end());
  const std::size_t low = decile_count(frames);
  const std::size_t high = std::max<std::size_t>(1, frames / 2);
  const double noise = std::accumulate(energy.begin(), energy.begin() + static_cast<std::ptrdiff_t>(low), 0.0) /
                       static_cast<double>(low);
  const double signal = std::accumulate(energy.end() - static_cast<std::ptrdiff_t>(high), energy.end(), 0.0) /
                        static_cast<double>(high);
  if (noise < 1e-12) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

double estimate_speaking_rate(const Waveform& w, const text::SymbolSequence& seq) {
  const double seconds = w.duration();
  if (!(seconds > 0)) throw Error(ErrorKind::Data, "speaking rate needs a non-empty waveform");
  return static_cast<double>(seq.content_length()) / seconds;
}

double estimate_articulation(const Waveform& w, const StftConfig& cfg) {
  if (w.samples.size() < cfg.win_length)
    throw Error(ErrorKind::Data, "articulation needs at least " + std::to_string(kMinFrames) + " frames");
  const std::size_t frames = num_frames(w.samples.size(), cfg);
  if (frames < kMinFrames)
    throw Error(ErrorKind::Data, "articulation needs at least " + std::to_string(kMinFrames) + " frames, got " +
                                     std::to_string(frames));
  std::vector<double> db(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double e = 0.0;
    for (std::size_t i = 0; i < cfg.win_length; ++i) {
      const double s = w.samples[f * cfg.hop + i];
      e += s * s;
    }
    db[f] = 10.0 * std::log10(e / static_cast<double>(cfg.win_length) + 1e-20);
  }
  std::vector<double> sorted = db;
  std::sort(sorted.begin(), sorted.end());
  const double threshold = sorted[decile_count(frames) - 1];
  std::vector<double> kept;
  for (double v : db)
    if (v > threshold) kept.push_back(v);
  if (kept.size() < 2) return 0.0;
  const double mean = std::accumulate(kept.begin(), kept.end(), 0.0) / static_cast<double>(kept.size());
  double var = 0.0;
  for (double v : kept) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(kept.size()));
}

QualityMetrics measure_quality(const Waveform& w, const text::SymbolSequence& seq, const StftConfig& cfg) {
  return {estimate_snr(w, cfg), estimate_speaking_rate(w, seq), estimate_articulation(w, cfg)};
}

}  // namespace xtts::audio
