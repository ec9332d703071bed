#include "xtts/kernels.hpp"

#include <algorithm>
#include <atomic>

#include <omp.h>

namespace xtts::kernels {
namespace {

std::atomic<Exec> g_exec{Exec::Parallel};

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = std::size_t{1} << 15;

template <class T>
inline T a_at(const T* a, bool trans, std::size_t m, std::size_t k,
              std::size_t i, std::size_t p) {
  return trans ? a[p * m + i] : a[i * k + p];
}

// Computes the block rows [i0, i1) x cols [j0, j1) of C.
template <class T>
void gemm_block(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                std::size_t k, const T* a, const T* b, T* c, bool accumulate,
                std::size_t i0, std::size_t i1, std::size_t j0,
                std::size_t j1) {
  if (!trans_b) {
    for (std::size_t i = i0; i < i1; ++i) {
      T* crow = c + i * n;
      if (!accumulate) std::fill(crow + j0, crow + j1, T(0));
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = a_at(a, trans_a, m, k, i, p);
        const T* brow = b + p * n;
        for (std::size_t j = j0; j < j1; ++j) crow[j] += aip * brow[j];
      }
    }
  } else {
    for (std::size_t i = i0; i < i1; ++i) {
      T* crow = c + i * n;
      for (std::size_t j = j0; j < j1; ++j) {
        const T* bcol = b + j * k;
        T sum = 0;
        for (std::size_t p = 0; p < k; ++p)
          sum += a_at(a, trans_a, m, k, i, p) * bcol[p];
        crow[j] = accumulate ? crow[j] + sum : sum;
      }
    }
  }
}

}  // namespace

Exec default_exec() { return g_exec.load(std::memory_order_relaxed); }

void set_default_exec(Exec exec) {
  g_exec.store(exec, std::memory_order_relaxed);
}

void set_max_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int max_threads() { return omp_get_max_threads(); }

template <class T>
void gemm(Exec exec, bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  const std::size_t work = m * n * k;
  if (exec == Exec::Serial || work < kParallelWork || omp_get_max_threads() == 1) {
    gemm_block(trans_a, trans_b, m, n, k, a, b, c, accumulate, 0, m, 0, n);
    return;
  }
  if (m > 1) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
      const auto r = static_cast<std::size_t>(i);
      gemm_block(trans_a, trans_b, m, n, k, a, b, c, accumulate, r, r + 1, 0, n);
    }
  } else {
    constexpr std::size_t kCols = 64;
    const auto blocks = static_cast<std::ptrdiff_t>((n + kCols - 1) / kCols);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
      const std::size_t j0 = static_cast<std::size_t>(blk) * kCols;
      gemm_block(trans_a, trans_b, m, n, k, a, b, c, accumulate, 0, m, j0,
                 std::min(n, j0 + kCols));
    }
  }
}

template <class T>
void conv1d_forward(Exec exec, std::size_t steps, std::size_t c_in,
                    std::size_t c_out, std::size_t kernel, const T* x,
                    const T* w, const T* bias, T* y) {
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto n_steps = static_cast<std::ptrdiff_t>(steps);
  const bool parallel = exec == Exec::Parallel &&
                        steps * c_in * c_out * kernel >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t t = 0; t < n_steps; ++t) {
    T* yrow = y + static_cast<std::size_t>(t) * c_out;
    for (std::size_t o = 0; o < c_out; ++o) yrow[o] = bias ? bias[o] : T(0);
    for (std::size_t q = 0; q < kernel; ++q) {
      const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(q) - half;
      if (s < 0 || s >= n_steps) continue;
      const T* xrow = x + static_cast<std::size_t>(s) * c_in;
      for (std::size_t i = 0; i < c_in; ++i) {
        const T xv = xrow[i];
        const T* wrow = w + (q * c_in + i) * c_out;
        for (std::size_t o = 0; o < c_out; ++o) yrow[o] += xv * wrow[o];
      }
    }
  }
}

template <class T>
void conv1d_backward(Exec exec, std::size_t steps, std::size_t c_in,
                     std::size_t c_out, std::size_t kernel, const T* x,
                     const T* w, const T* dy, T* dx, T* dw, T* dbias) {
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto n_steps = static_cast<std::ptrdiff_t>(steps);
  const bool parallel = exec == Exec::Parallel &&
                        steps * c_in * c_out * kernel >= kParallelWork;
  if (dx) {
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t s = 0; s < n_steps; ++s) {
      T* dxrow = dx + static_cast<std::size_t>(s) * c_in;
      for (std::size_t q = 0; q < kernel; ++q) {
        const std::ptrdiff_t t = s - static_cast<std::ptrdiff_t>(q) + half;
        if (t < 0 || t >= n_steps) continue;
        const T* dyrow = dy + static_cast<std::size_t>(t) * c_out;
        for (std::size_t i = 0; i < c_in; ++i) {
          const T* wrow = w + (q * c_in + i) * c_out;
          T sum = 0;
          for (std::size_t o = 0; o < c_out; ++o) sum += dyrow[o] * wrow[o];
          dxrow[i] += sum;
        }
      }
    }
  }
  if (dw) {
    const auto pairs = static_cast<std::ptrdiff_t>(kernel * c_in);
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t qi = 0; qi < pairs; ++qi) {
      const std::size_t q = static_cast<std::size_t>(qi) / c_in;
      const std::size_t i = static_cast<std::size_t>(qi) % c_in;
      T* dwrow = dw + static_cast<std::size_t>(qi) * c_out;
      for (std::ptrdiff_t t = 0; t < n_steps; ++t) {
        const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(q) - half;
        if (s < 0 || s >= n_steps) continue;
        const T xv = x[static_cast<std::size_t>(s) * c_in + i];
        const T* dyrow = dy + static_cast<std::size_t>(t) * c_out;
        for (std::size_t o = 0; o < c_out; ++o) dwrow[o] += xv * dyrow[o];
      }
    }
  }
  if (dbias) {
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t o = 0; o < c_out; ++o) dbias[o] += dy[t * c_out + o];
  }
}

template void gemm<float>(Exec, bool, bool, std::size_t, std::size_t,
                          std::size_t, const float*, const float*, float*, bool);
template void gemm<double>(Exec, bool, bool, std::size_t, std::size_t,
                           std::size_t, const double*, const double*, double*,
                           bool);
template void conv1d_forward<float>(Exec, std::size_t, std::size_t, std::size_t,
                                    std::size_t, const float*, const float*,
                                    const float*, float*);
template void conv1d_forward<double>(Exec, std::size_t, std::size_t,
                                     std::size_t, std::size_t, const double*,
                                     const double*, const double*, double*);
template void conv1d_backward<float>(Exec, std::size_t, std::size_t,
                                     std::size_t, std::size_t, const float*,
                                     const float*, const float*, float*, float*,
                                     float*);
template void conv1d_backward<double>(Exec, std::size_t, std::size_t,
                                      std::size_t, std::size_t, const double*,
                                      const double*, const double*, double*,
                                      double*, double*);

}  // namespace xtts::kernels
