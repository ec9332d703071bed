#pragma once

// Dense inner loops shared by the differentiable core and the audio front end.
// Every kernel has a serial reference path and an OpenMP path. The parallel
// path partitions output elements only, so each element sees the same
// summation order and both paths agree bit for bit.

#include <cstddef>

namespace xtts::kernels {

enum class Exec { Serial, Parallel };

// Process-wide default used by the tensor ops; tests and benchmarks may flip it.
Exec default_exec();
void set_default_exec(Exec exec);

// Caps OpenMP workers; 0 leaves the runtime default.
void set_max_threads(int threads);
int max_threads();

// C[M x N] (+)= op(A)[M x K] * op(B)[K x N], row-major.
// op(A) = A^T when trans_a (A stored K x M); likewise for B (stored N x K).
template <class T>
void gemm(Exec exec, bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T* c, bool accumulate);

// Same-padded 1-D convolution along time.
// x: [T x Cin], w: [K x Cin x Cout], bias: [Cout] (may be null), y: [T x Cout].
template <class T>
void conv1d_forward(Exec exec, std::size_t steps, std::size_t c_in,
                    std::size_t c_out, std::size_t kernel, const T* x,
                    const T* w, const T* bias, T* y);

// Gradients of conv1d_forward. Any of dx/dw/dbias may be null.
template <class T>
void conv1d_backward(Exec exec, std::size_t steps, std::size_t c_in,
                     std::size_t c_out, std::size_t kernel, const T* x,
                     const T* w, const T* dy, T* dx, T* dw, T* dbias);

}  // namespace xtts::kernels
