#pragma once

// Waveform I/O, log-mel analysis, Griffin-Lim inversion and the three
// transcript-light quality metrics used to rank found data.

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "xtts/kernels.hpp"
#include "xtts/text.hpp"

namespace xtts::audio {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 16000;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

struct StftConfig {
  int sample_rate = 16000;
  std::size_t fft_size = 1024;
  std::size_t hop = 200;  // 12.5 ms at 16 kHz
  std::size_t win_length = 800;
  std::size_t mel_bins = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-5;

  std::size_t num_bins() const { return fft_size / 2 + 1; }
  void validate() const;  // throws Error(Config)

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static StftConfig from_json(const nlohmann::json& j, const std::string& where = "audio");

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

// Dense row-major matrix used for spectrogram frames.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct MelSpectrogram {
  Matrix frames;  // [T_out x mel_bins], natural-log mel energies
  StftConfig config;

  std::size_t num_frames() const { return frames.rows; }
};

struct QualityMetrics {
  double snr_db = 0.0;
  double speaking_rate = 0.0;  // symbols per second
  double articulation = 0.0;   // frame log-energy std, dB
};

// PCM16 mono only. When expected_rate is set, a different header rate is an error.
Waveform wav_read(const std::filesystem::path& path, std::optional<int> expected_rate = std::nullopt);
Waveform wav_decode(std::string_view bytes, std::optional<int> expected_rate = std::nullopt);
void wav_write(const std::filesystem::path& path, const Waveform& w);
std::string wav_encode(const Waveform& w);

// 1 + floor((len - win_length) / hop); no padding.
std::size_t num_frames(std::size_t num_samples, const StftConfig& cfg);

// Complex STFT, [T x (fft_size/2+1)] row-major. A periodic Hann window of
// win_length sits centred in each fft_size frame.
std::vector<std::complex<double>> stft(const std::vector<double>& samples, const StftConfig& cfg,
                                       kernels::Exec exec = kernels::default_exec());
Matrix stft_power(const std::vector<double>& samples, const StftConfig& cfg,
                  kernels::Exec exec = kernels::default_exec());
// Weighted overlap-add inverse; output length (T-1)*hop + win_length.
std::vector<double> istft(const std::vector<std::complex<double>>& spec, std::size_t frames,
                          const StftConfig& cfg);

// Triangular HTK-mel filters, each scaled to unit area: [mel_bins x num_bins].
Matrix mel_filterbank(const StftConfig& cfg);
std::vector<double> mel_center_frequencies(const StftConfig& cfg);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

MelSpectrogram wav_to_mel(const Waveform& w, const StftConfig& cfg,
                          kernels::Exec exec = kernels::default_exec());

// Mel energies back to linear magnitude through the filterbank pseudo-inverse
// (clamped at zero): [T x num_bins].
Matrix mel_to_magnitude(const MelSpectrogram& mel);

// Zero-phase start, then `iterations` magnitude projections.
Waveform griffin_lim(const Matrix& magnitude, const StftConfig& cfg, int iterations = 60);
Waveform griffin_lim(const MelSpectrogram& mel, int iterations = 60);

// ||STFT(x)| - M||_F / ||M||_F over the frames both share.
double spectral_convergence(const Waveform& w, const Matrix& magnitude, const StftConfig& cfg);

// Hop-sized frame energies: noise = mean of the lowest decile, signal = mean
// of the top half. +infinity when the noise floor is below 1e-12.
double estimate_snr(const Waveform& w, const StftConfig& cfg);
double estimate_speaking_rate(const Waveform& w, const text::SymbolSequence& seq);
// Std (dB) of per-frame log-energy over frames above the lowest-decile level.
// Returns 0 when fewer than two frames clear that level (e.g. silence).
double estimate_articulation(const Waveform& w, const StftConfig& cfg);

QualityMetrics measure_quality(const Waveform& w, const text::SymbolSequence& seq, const StftConfig& cfg);

// "MEL1", u32 frames, u32 bins, then row-major little-endian float32.
void write_mel(const std::filesystem::path& path, const Matrix& frames);
Matrix read_mel(const std::filesystem::path& path);
std::string encode_mel(const Matrix& frames);
Matrix decode_mel(std::string_view bytes);

}  // namespace xtts::audio
