#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <Eigen/Dense>
#include <fftw3.h>

#include "xtts/audio.hpp"
#include "xtts/error.hpp"

namespace xtts::audio {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    double* re = fftw_alloc_real(n);
    fftw_complex* cx = fftw_alloc_complex(n / 2 + 1);
    r2c_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), re, cx, FFTW_ESTIMATE);
    c2r_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), cx, re, FFTW_ESTIMATE);
    fftw_free(re);
    fftw_free(cx);
  }
  ~RealFft() {
    fftw_destroy_plan(r2c_);
    fftw_destroy_plan(c2r_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  void forward(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(r2c_, in, out); }
  // Destroys `in`.
  void inverse(fftw_complex* in, double* out) const { fftw_execute_dft_c2r(c2r_, in, out); }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  fftw_plan r2c_;
  fftw_plan c2r_;
};

std::mutex g_plan_mutex;

const RealFft& fft_for(std::size_t n) {
  static std::map<std::size_t, std::unique_ptr<RealFft>> cache;
  std::lock_guard lock(g_plan_mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

struct FftBuffers {
  explicit FftBuffers(std::size_t n) : real(fftw_alloc_real(n)), cplx(fftw_alloc_complex(n / 2 + 1)) {}
  ~FftBuffers() {
    fftw_free(real);
    fftw_free(cplx);
  }
  FftBuffers(const FftBuffers&) = delete;
  FftBuffers& operator=(const FftBuffers&) = delete;

  double* real;
  fftw_complex* cplx;
};

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }) ==
        known.end())
      throw Error(ErrorKind::Config, "unknown config key '" + where + "." + it.key() + "'");
  }
}

}  // namespace

void StftConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "audio config: " + m); };
  if (sample_rate <= 0) fail("sample_rate must be positive");
  if (hop == 0 || win_length == 0 || fft_size == 0 || mel_bins == 0) fail("sizes must be positive");
  if (!(hop <= win_length && win_length <= fft_size)) fail("need hop <= win_length <= fft_size");
  if (!(fmin >= 0 && fmin < fmax && fmax <= sample_rate / 2.0)) fail("need 0 <= fmin < fmax <= sample_rate/2");
  if (!(log_floor > 0)) fail("log_floor must be positive");
}

nlohmann::json StftConfig::to_json() const {
  return {{"sample_rate", sample_rate}, {"fft_size", fft_size}, {"hop", hop},
          {"win_length", win_length},   {"mel_bins", mel_bins}, {"fmin", fmin},
          {"fmax", fmax},               {"log_floor", log_floor}};
}

StftConfig StftConfig::from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  reject_unknown(j, {"sample_rate", "fft_size", "hop", "win_length", "mel_bins", "fmin", "fmax", "log_floor"},
                 where);
  StftConfig c;
  try {
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.fft_size = j.value("fft_size", c.fft_size);
    c.hop = j.value("hop", c.hop);
    c.win_length = j.value("win_length", c.win_length);
    c.mel_bins = j.value("mel_bins", c.mel_bins);
    c.fmin = j.value("fmin", c.fmin);
    c.fmax = j.value("fmax", c.fmax);
    c.log_floor = j.value("log_floor", c.log_floor);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, where + ": " + e.what());
  }
  c.validate();
  return c;
}

std::size_t num_frames(std::size_t num_samples, const StftConfig& cfg) {
  if (num_samples < cfg.win_length)
    throw Error(ErrorKind::Data, "waveform too short: " + std::to_string(num_samples) +
                                     " samples < win_length " + std::to_string(cfg.win_length));
  return 1 + (num_samples - cfg.win_length) / cfg.hop;
}

std::vector<std::complex<double>> stft(const std::vector<double>& samples, const StftConfig& cfg,
                                       kernels::Exec exec) {
  const std::size_t frames = num_frames(samples.size(), cfg);
  const std::size_t n = cfg.fft_size;
  const std::size_t bins = cfg.num_bins();
  const std::size_t offset = (n - cfg.win_length) / 2;
  const auto window = hann(cfg.win_length);
  const RealFft& fft = fft_for(n);
  std::vector<std::complex<double>> out(frames * bins);
  const auto count = static_cast<std::ptrdiff_t>(frames);
#pragma omp parallel if (exec == kernels::Exec::Parallel && frames > 8)
  {
    FftBuffers buf(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t t = 0; t < count; ++t) {
      const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
      std::fill(buf.real, buf.real + n, 0.0);
      for (std::size_t i = 0; i < cfg.win_length; ++i)
        buf.real[offset + i] = samples[start + i] * window[i];
      fft.forward(buf.real, buf.cplx);
      auto* row = out.data() + static_cast<std::size_t>(t) * bins;
      for (std::size_t k = 0; k < bins; ++k) row[k] = {buf.cplx[k][0], buf.cplx[k][1]};
    }
  }
  return out;
}

Matrix stft_power(const std::vector<double>& samples, const StftConfig& cfg, kernels::Exec exec) {
  const auto spec = stft(samples, cfg, exec);
  Matrix p(spec.size() / cfg.num_bins(), cfg.num_bins());
  for (std::size_t i = 0; i < spec.size(); ++i) p.data[i] = std::norm(spec[i]);
  return p;
}

std::vector<double> istft(const std::vector<std::complex<double>>& spec, std::size_t frames,
                          const StftConfig& cfg) {
  const std::size_t n = cfg.fft_size;
  const std::size_t bins = cfg.num_bins();
  if (spec.size() != frames * bins) throw Error(ErrorKind::Shape, "istft: spectrum size mismatch");
  if (frames == 0) return {};
  const std::size_t offset = (n - cfg.win_length) / 2;
  const auto window = hann(cfg.win_length);
  const std::size_t length = (frames - 1) * cfg.hop + cfg.win_length;
  std::vector<double> out(length, 0.0);
  std::vector<double> wsum(length, 0.0);
  const RealFft& fft = fft_for(n);
  FftBuffers buf(n);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto* row = spec.data() + t * bins;
    for (std::size_t k = 0; k < bins; ++k) {
      buf.cplx[k][0] = row[k].real();
      buf.cplx[k][1] = row[k].imag();
    }
    fft.inverse(buf.cplx, buf.real);
    const std::size_t start = t * cfg.hop;
    for (std::size_t i = 0; i < cfg.win_length; ++i) {
      out[start + i] += buf.real[offset + i] / static_cast<double>(n) * window[i];
      wsum[start + i] += window[i] * window[i];
    }
  }
  for (std::size_t i = 0; i < length; ++i)
    if (wsum[i] > 1e-10) out[i] /= wsum[i];
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {
std::vector<double> mel_edges(const StftConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.fmax);
  std::vector<double> hz(cfg.mel_bins + 2);
  for (std::size_t i = 0; i < hz.size(); ++i)
    hz[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.mel_bins + 1));
  return hz;
}
}  // namespace

std::vector<double> mel_center_frequencies(const StftConfig& cfg) {
  const auto edges = mel_edges(cfg);
  return {edges.begin() + 1, edges.end() - 1};
}

Matrix mel_filterbank(const StftConfig& cfg) {
  cfg.validate();
  const auto edges = mel_edges(cfg);
  const std::size_t bins = cfg.num_bins();
  Matrix fb(cfg.mel_bins, bins);
  for (std::size_t m = 0; m < cfg.mel_bins; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    const double norm = 2.0 / (hi - lo);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.fft_size);
      double w = 0.0;
      if (f > lo && f <= center) {
        w = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        w = (hi - f) / (hi - center);
      }
      fb(m, k) = w * norm;
    }
  }
  return fb;
}

MelSpectrogram wav_to_mel(const Waveform& w, const StftConfig& cfg, kernels::Exec exec) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate)
    throw Error(ErrorKind::Data, "sample rate mismatch: waveform " + std::to_string(w.sample_rate) +
                                     " Hz, config " + std::to_string(cfg.sample_rate) + " Hz");
  const Matrix power = stft_power(w.samples, cfg, exec);
  const Matrix fb = mel_filterbank(cfg);
  MelSpectrogram mel;
  mel.config = cfg;
  mel.frames = Matrix(power.rows, cfg.mel_bins);
  const double log_floor = std::log(cfg.log_floor);
  for (std::size_t t = 0; t < power.rows; ++t) {
    for (std::size_t m = 0; m < cfg.mel_bins; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < power.cols; ++k) e += fb(m, k) * power(t, k);
      mel.frames(t, m) = e > cfg.log_floor ? std::log(e) : log_floor;
    }
  }
  return mel;
}

Matrix mel_to_magnitude(const MelSpectrogram& mel) {
  const StftConfig& cfg = mel.config;
  if (mel.frames.cols != cfg.mel_bins) throw Error(ErrorKind::Shape, "mel frames do not match config mel_bins");
  const Matrix fb = mel_filterbank(cfg);
  Eigen::MatrixXd f(fb.rows, fb.cols);
  for (std::size_t r = 0; r < fb.rows; ++r)
    for (std::size_t c = 0; c < fb.cols; ++c) f(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = fb(r, c);
  const Eigen::MatrixXd pinv = f.completeOrthogonalDecomposition().pseudoInverse();
  Matrix mag(mel.frames.rows, cfg.num_bins());
  Eigen::VectorXd energy(static_cast<Eigen::Index>(cfg.mel_bins));
  for (std::size_t t = 0; t < mel.frames.rows; ++t) {
    // Values at the floor stand for "no more than floor", so they map to zero energy.
    for (std::size_t m = 0; m < cfg.mel_bins; ++m)
      energy(static_cast<Eigen::Index>(m)) = std::max(std::exp(mel.frames(t, m)) - cfg.log_floor, 0.0);
    const Eigen::VectorXd lin = pinv * energy;
    for (std::size_t k = 0; k < mag.cols; ++k)
      mag(t, k) = std::sqrt(std::max(lin(static_cast<Eigen::Index>(k)), 0.0));
  }
  return mag;
}

Waveform griffin_lim(const Matrix& magnitude, const StftConfig& cfg, int iterations) {
  cfg.validate();
  if (iterations < 1) throw Error(ErrorKind::Usage, "griffin_lim: iterations must be >= 1");
  if (magnitude.cols != cfg.num_bins())
    throw Error(ErrorKind::Shape, "griffin_lim: magnitude has " + std::to_string(magnitude.cols) +
                                      " bins, config implies " + std::to_string(cfg.num_bins()));
  const std::size_t frames = magnitude.rows;
  std::vector<std::complex<double>> spec(magnitude.data.begin(), magnitude.data.end());
  // Fast Griffin-Lim: each phase estimate is extrapolated past the previous
  // projection before renormalizing.
  constexpr double kMomentum = 0.99;
  std::vector<double> x = istft(spec, frames, cfg);
  std::vector<std::complex<double>> prev(spec.size());
  for (int it = 0; it < iterations; ++it) {
    const auto est = stft(x, cfg);
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const std::complex<double> z = est[i] - (kMomentum / (1.0 + kMomentum)) * prev[i];
      const double a = std::abs(z);
      spec[i] = a > 1e-12 ? z * (magnitude.data[i] / a) : std::complex<double>(magnitude.data[i], 0.0);
      prev[i] = est[i];
    }
    x = istft(spec, frames, cfg);
  }
  Waveform w;
  w.sample_rate = cfg.sample_rate;
  w.samples = std::move(x);
  for (double& s : w.samples) s = std::clamp(s, -1.0, 1.0);
  return w;
}

Waveform griffin_lim(const MelSpectrogram& mel, int iterations) {
  return griffin_lim(mel_to_magnitude(mel), mel.config, iterations);
}

double spectral_convergence(const Waveform& w, const Matrix& magnitude, const StftConfig& cfg) {
  const Matrix power = stft_power(w.samples, cfg);
  const std::size_t frames = std::min(power.rows, magnitude.rows);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < magnitude.cols; ++k) {
      const double d = std::sqrt(power(t, k)) - magnitude(t, k);
      num += d * d;
      den += magnitude(t, k) * magnitude(t, k);
    }
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace xtts::audio
