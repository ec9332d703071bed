// 10 dB tone-in-noise mixtures with noise-only padding, 20 noise seeds.

#include <cmath>
#include <numbers>
#include <sstream>

#include "acceptance/acceptance.hpp"
#include "support.hpp"
#include "xtts/audio.hpp"

namespace xtts::acceptance {

Outcome snr_tolerance() {
  const audio::StftConfig cfg;
  const int sr = cfg.sample_rate;
  const std::size_t n_pad = static_cast<std::size_t>(0.3 * sr), n_body = static_cast<std::size_t>(1.0 * sr);
  double worst = 0.0, lo = 1e9, hi = -1e9;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    // Two-partial tone; its power over the active region sets the noise level.
    const double f0 = 150.0 + 37.0 * static_cast<double>(seed);
    std::vector<double> body(n_body);
    double power = 0.0;
    for (std::size_t i = 0; i < n_body; ++i) {
      const double t = static_cast<double>(i) / sr;
      body[i] = 0.4 * std::sin(2 * std::numbers::pi * f0 * t) + 0.2 * std::sin(2 * std::numbers::pi * 2 * f0 * t);
      power += body[i] * body[i];
    }
    power /= static_cast<double>(n_body);
    const double sigma = std::sqrt(power / 10.0);
    audio::Waveform w{xtts::testing::white_noise(n_body + 2 * n_pad, sigma, 1000 + seed), sr};
    for (std::size_t i = 0; i < n_body; ++i) w.samples[n_pad + i] += body[i];
    const double est = audio::estimate_snr(w, cfg);
    worst = std::max(worst, std::abs(est - 10.0));
    lo = std::min(lo, est);
    hi = std::max(hi, est);
  }
  std::ostringstream os;
  os << "20 seeds, estimates in [" << lo << ", " << hi << "] dB, max |error| " << worst << " dB";
  return {worst <= 1.5, os.str()};
}

}  // namespace xtts::acceptance
