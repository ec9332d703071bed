// Serial reference vs OpenMP path for the hot kernels.
//   bench_kernels --benchmark_filter=gemm
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "xtts/audio.hpp"
#include "xtts/kernels.hpp"

using xtts::kernels::Exec;

namespace {

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto a = random_floats(n * n, 1), b = random_floats(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    xtts::kernels::gemm(exec_of(state), false, false, n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}

void BM_conv1d(benchmark::State& state) {
  const std::size_t steps = static_cast<std::size_t>(state.range(1)), ch = 128, k = 5;
  const auto x = random_floats(steps * ch, 3), w = random_floats(k * ch * ch, 4), bias = random_floats(ch, 5);
  std::vector<float> y(steps * ch);
  for (auto _ : state) {
    xtts::kernels::conv1d_forward(exec_of(state), steps, ch, ch, k, x.data(), w.data(), bias.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_stft(benchmark::State& state) {
  const xtts::audio::StftConfig cfg;
  std::mt19937_64 gen(6);
  std::normal_distribution<double> d(0.0, 0.1);
  std::vector<double> samples(static_cast<std::size_t>(state.range(1)) * cfg.sample_rate);
  for (auto& s : samples) s = d(gen);
  for (auto _ : state) benchmark::DoNotOptimize(xtts::audio::stft_power(samples, cfg, exec_of(state)));
}

}  // namespace

// First argument: 0 = serial, 1 = parallel.
BENCHMARK(BM_gemm)->ArgNames({"par", "n"})->ArgsProduct({{0, 1}, {64, 256}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_conv1d)->ArgNames({"par", "T"})->ArgsProduct({{0, 1}, {100, 800}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_stft)->ArgNames({"par", "sec"})->ArgsProduct({{0, 1}, {1, 10}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
