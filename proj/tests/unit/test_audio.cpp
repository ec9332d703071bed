#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "support.hpp"
#include "xtts/audio.hpp"
#include "xtts/error.hpp"

using namespace xtts;
using namespace xtts::audio;
using xtts::testing::sine;
using xtts::testing::TempDir;
using xtts::testing::white_noise;

namespace {

std::string le16(unsigned v) { return {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)}; }
std::string le32(unsigned v) { return le16(v & 0xffff) + le16(v >> 16); }

std::string wav_header(unsigned channels, unsigned rate, unsigned bits, unsigned format, unsigned data_bytes) {
  std::string h = "RIFF" + le32(36 + data_bytes) + "WAVE";
  h += "fmt " + le32(16) + le16(format) + le16(channels) + le32(rate) + le32(rate * channels * bits / 8) +
       le16(channels * bits / 8) + le16(bits);
  h += "data" + le32(data_bytes);
  return h + std::string(data_bytes, '\0');
}

double rms(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

Waveform noise_wave(std::size_t n, double sigma, std::uint64_t seed) { return {white_noise(n, sigma, seed), 16000}; }

StftConfig small_cfg() {
  StftConfig c;
  c.fft_size = 512;
  c.hop = 128;
  c.win_length = 512;
  c.mel_bins = 40;
  return c;
}

}  // namespace

TEST(Wav, RoundTripWithinOneLsb) {
  TempDir dir("wav");
  auto w = sine(440.0, 1.0, 0.8);
  wav_write(dir / "a.wav", w);
  auto r = wav_read(dir / "a.wav");
  ASSERT_EQ(r.samples.size(), w.samples.size());
  EXPECT_EQ(r.sample_rate, 16000);
  double worst = 0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) worst = std::max(worst, std::abs(r.samples[i] - w.samples[i]));
  EXPECT_LE(worst, std::ldexp(1.0, -15));
}

TEST(Wav, StereoRejected) {
  try {
    wav_decode(wav_header(2, 16000, 16, 1, 8));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
    EXPECT_NE(std::string(e.what()).find("unsupported channel count"), std::string::npos) << e.what();
  }
}

TEST(Wav, RateMismatchRejected) {
  EXPECT_NO_THROW(wav_decode(wav_header(1, 44100, 16, 1, 8)));
  try {
    wav_decode(wav_header(1, 44100, 16, 1, 8), 16000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("sample rate mismatch"), std::string::npos) << e.what();
  }
}

TEST(Wav, MalformedAndUnsupportedRejected) {
  EXPECT_THROW(wav_decode("RIFF"), Error);
  EXPECT_THROW(wav_decode(wav_header(1, 16000, 8, 1, 8)), Error);
  EXPECT_THROW(wav_decode(wav_header(1, 16000, 32, 3, 8)), Error);
  TempDir dir("wav_missing");
  try {
    wav_read(dir / "nope.wav");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Mel, FrameCountFormula) {
  StftConfig cfg;
  EXPECT_EQ(num_frames(800, cfg), 1u);
  EXPECT_EQ(num_frames(999, cfg), 1u);
  EXPECT_EQ(num_frames(1000, cfg), 2u);
  EXPECT_EQ(num_frames(16000, cfg), 1 + (16000 - 800) / 200);
  EXPECT_THROW(num_frames(799, cfg), Error);
  auto mel = wav_to_mel(sine(300, 0.5), cfg);
  EXPECT_EQ(mel.num_frames(), 1 + (8000 - 800) / 200);
  EXPECT_EQ(mel.frames.cols, 80u);
}

TEST(Mel, SilenceIsFloor) {
  StftConfig cfg;
  Waveform w{std::vector<double>(4000, 0.0), 16000};
  auto mel = wav_to_mel(w, cfg);
  for (double v : mel.frames.data) EXPECT_EQ(v, std::log(1e-5));
}

TEST(Mel, SineLandsInNearestCenterBin) {
  StftConfig cfg;
  // Independent HTK-mel centres: mel_bins + 2 equally spaced points between fmin and fmax.
  auto to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::size_t expect = 0;
  double best = 1e300;
  for (std::size_t i = 0; i < cfg.mel_bins; ++i) {
    const double c = to_hz(to_mel(cfg.fmax) * static_cast<double>(i + 1) / static_cast<double>(cfg.mel_bins + 1));
    if (std::abs(c - 1000.0) < best) {
      best = std::abs(c - 1000.0);
      expect = i;
    }
  }
  auto mel = wav_to_mel(sine(1000.0, 0.5), cfg);
  for (std::size_t t = 0; t < mel.num_frames(); ++t) {
    std::size_t arg = 0;
    for (std::size_t m = 1; m < cfg.mel_bins; ++m)
      if (mel.frames(t, m) > mel.frames(t, arg)) arg = m;
    EXPECT_EQ(arg, expect) << "frame " << t;
  }
}

TEST(Mel, DoublingAmplitudeAddsLnFour) {
  StftConfig cfg;
  auto a = wav_to_mel(sine(700.0, 0.4, 0.25), cfg);
  auto b = wav_to_mel(sine(700.0, 0.4, 0.5), cfg);
  const double floor = std::log(cfg.log_floor);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < a.frames.data.size(); ++i) {
    if (a.frames.data[i] <= floor) continue;
    EXPECT_NEAR(b.frames.data[i] - a.frames.data[i], std::log(4.0), 1e-6);
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}

TEST(Mel, DeterministicAndParallelMatchesSerial) {
  StftConfig cfg;
  auto w = noise_wave(16000, 0.3, 5);
  auto a = wav_to_mel(w, cfg, kernels::Exec::Serial);
  auto b = wav_to_mel(w, cfg, kernels::Exec::Parallel);
  auto c = wav_to_mel(w, cfg, kernels::Exec::Parallel);
  EXPECT_EQ(a.frames.data, b.frames.data);
  EXPECT_EQ(b.frames.data, c.frames.data);
}

TEST(Filterbank, NonNegativeUnitAreaNoHoles) {
  for (StftConfig cfg : {StftConfig{}, small_cfg()}) {
    auto fb = mel_filterbank(cfg);
    for (double v : fb.data) EXPECT_GE(v, 0.0);
    for (std::size_t k = 0; k < fb.cols; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.fft_size);
      if (!(f > cfg.fmin && f < cfg.fmax)) continue;
      double col = 0;
      for (std::size_t m = 0; m < fb.rows; ++m) col += fb(m, k);
      EXPECT_GT(col, 0.0) << "bin " << k << " at " << f << " Hz";
    }
  }
}

TEST(Config, Validation) {
  StftConfig c;
  c.hop = 900;
  EXPECT_THROW(c.validate(), Error);
  c = StftConfig{};
  c.fmax = 9000;
  EXPECT_THROW(c.validate(), Error);
  c = StftConfig{};
  EXPECT_EQ(StftConfig::from_json(c.to_json()), c);
  EXPECT_THROW(StftConfig::from_json({{"hopp", 3}}), Error);
}

TEST(GriffinLim, PureToneConverges) {
  StftConfig cfg;
  auto w = sine(440.0, 1.0, 0.5);
  const auto power = stft_power(w.samples, cfg);
  Matrix mag(power.rows, power.cols);
  for (std::size_t i = 0; i < power.data.size(); ++i) mag.data[i] = std::sqrt(power.data[i]);
  auto one = griffin_lim(mag, cfg, 1);
  auto sixty = griffin_lim(mag, cfg, 60);
  const double e1 = spectral_convergence(one, mag, cfg);
  const double e60 = spectral_convergence(sixty, mag, cfg);
  EXPECT_LT(e60, 0.1);
  EXPECT_LE(e60, e1);
  EXPECT_EQ(sixty.samples.size(), (mag.rows - 1) * cfg.hop + cfg.win_length);
  EXPECT_EQ(griffin_lim(mag, cfg, 60).samples, sixty.samples);
}

TEST(GriffinLim, SilentMelGivesNearSilence) {
  StftConfig cfg;
  MelSpectrogram mel;
  mel.config = cfg;
  mel.frames = Matrix(20, cfg.mel_bins, std::log(cfg.log_floor));
  auto w = griffin_lim(mel, 10);
  EXPECT_EQ(w.samples.size(), 19 * cfg.hop + cfg.win_length);
  EXPECT_LT(rms(w.samples), 1e-3);
}

TEST(GriffinLim, RejectsBadArguments) {
  StftConfig cfg;
  Matrix mag(4, cfg.num_bins());
  EXPECT_THROW(griffin_lim(mag, cfg, 0), Error);
  EXPECT_THROW(griffin_lim(Matrix(4, 7), cfg, 5), Error);
}

TEST(Snr, TenDbMixtureWithPadding) {
  StftConfig cfg;
  const double sr = 16000, pad = 0.3, body = 1.0;
  const std::size_t n_pad = static_cast<std::size_t>(pad * sr), n_body = static_cast<std::size_t>(body * sr);
  auto s = sine(440.0, body, 0.5);
  const double noise_sigma = std::sqrt(0.125 / 10.0);  // sine power 0.5^2/2 over noise power = 10
  auto noise = noise_wave(n_body + 2 * n_pad, noise_sigma, 3);
  for (std::size_t i = 0; i < n_body; ++i) noise.samples[n_pad + i] += s.samples[i];
  EXPECT_NEAR(estimate_snr(noise, cfg), 10.0, 1.5);
}

TEST(Snr, PureSineWithoutPaddingPinned) {
  // Every hop frame carries the tone, so the lowest decile is about as loud as the top half.
  const double snr = estimate_snr(sine(440.0, 1.0, 0.5), StftConfig{});
  EXPECT_TRUE(std::isfinite(snr));
  EXPECT_NEAR(snr, 0.0, 0.05);
}

TEST(Snr, SilenceIsInfinite) {
  Waveform w{std::vector<double>(16000, 0.0), 16000};
  EXPECT_TRUE(std::isinf(estimate_snr(w, StftConfig{})));
}

TEST(Snr, ScaleInvariant) {
  auto w = noise_wave(16000, 0.05, 8);
  auto s = sine(300.0, 0.5, 0.4);
  for (std::size_t i = 0; i < s.samples.size(); ++i) w.samples[4000 + i] += s.samples[i];
  const double base = estimate_snr(w, StftConfig{});
  for (double c : {0.01, 0.5, 1.7}) {
    Waveform scaled = w;
    for (double& v : scaled.samples) v *= c;
    EXPECT_NEAR(estimate_snr(scaled, StftConfig{}), base, 1e-6) << c;
  }
}

TEST(Snr, TooShortRejected) { EXPECT_THROW(estimate_snr(Waveform{std::vector<double>(19 * 200, 0.1), 16000}, StftConfig{}), Error); }

TEST(SpeakingRate, Arithmetic) {
  text::SymbolSequence ten;
  ten.ids.assign(11, 2);
  EXPECT_DOUBLE_EQ(estimate_speaking_rate(Waveform{std::vector<double>(32000, 0.0), 16000}, ten), 5.0);
  text::SymbolSequence one;
  one.ids = {2, 1};
  EXPECT_DOUBLE_EQ(estimate_speaking_rate(Waveform{std::vector<double>(8000, 0.0), 16000}, one), 2.0);
}

TEST(Articulation, FlatVersusModulated) {
  StftConfig cfg;
  auto flat = sine(300.0, 1.0, 0.5);
  auto am = flat;
  for (std::size_t i = 0; i < am.samples.size(); ++i) {
    // 20 dB peak-to-trough swing at 3 Hz.
    const double db = -10.0 + 10.0 * std::sin(2 * std::numbers::pi * 3.0 * static_cast<double>(i) / 16000.0);
    am.samples[i] *= std::pow(10.0, db / 20.0);
  }
  const double a_flat = estimate_articulation(flat, cfg);
  const double a_am = estimate_articulation(am, cfg);
  EXPECT_NEAR(a_flat, 0.0, 0.1);
  EXPECT_GT(a_am, a_flat + 1.0);
}

TEST(Articulation, SilenceIsZero) {
  EXPECT_EQ(estimate_articulation(Waveform{std::vector<double>(16000, 0.0), 16000}, StftConfig{}), 0.0);
}

TEST(MelFile, RoundTripAndBadMagic) {
  TempDir dir("mel");
  Matrix m(3, 4);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<double>(i) * 0.25 - 1.0;
  write_mel(dir / "a.mel", m);
  auto r = read_mel(dir / "a.mel");
  EXPECT_EQ(r.rows, 3u);
  EXPECT_EQ(r.cols, 4u);
  EXPECT_EQ(r.data, m.data);
  const auto bytes = encode_mel(m);
  EXPECT_EQ(bytes.substr(0, 4), "MEL1");
  EXPECT_EQ(bytes.size(), 12u + 12u * 4u);
  EXPECT_THROW(decode_mel("MEL2" + bytes.substr(4)), Error);
  EXPECT_THROW(decode_mel(bytes.substr(0, bytes.size() - 1)), Error);
}
