#pragma once

// Differentiable primitives. Shapes are checked eagerly; a mismatch throws
// Error(Shape) naming the op and both shapes.

#include <cstddef>
#include <span>
#include <vector>

#include "xtts/tensor.hpp"

namespace xtts::num::inline XTTS_PRECISION {

// [k] x [k,n] -> [n], or [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise, with `b` broadcast over the leading dims of `a` when b's shape
// is a suffix of a's shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real c);
Tensor add_scalar(const Tensor& a, Real c);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor softplus(const Tensor& a);

// axis counts from 0; -1 means the last axis. Rank <= 2.
Tensor softmax(const Tensor& a, int axis = -1);

Tensor sum(const Tensor& a);               // -> scalar
Tensor sum(const Tensor& a, int axis);     // rank-2 only, drops `axis`
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int axis);

// Mean over elements.
Tensor mse(const Tensor& a, const Tensor& b);
Tensor l1(const Tensor& a, const Tensor& b);
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor concat(std::initializer_list<Tensor> parts, int axis);
Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t length);
Tensor row(const Tensor& a, std::size_t index);        // [m,n] -> [n]
Tensor stack(std::span<const Tensor> rows);            // n x [d] -> [n,d]
Tensor repeat_rows(const Tensor& v, std::size_t times);  // [d] -> [times,d]
Tensor reshape(const Tensor& a, Shape shape);

// table [V,E], ids -> [T,E]. Backward scatters into the table and records the touched rows.
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

struct GruWeights {
  Tensor wx;  // [D, 3H], gate order r|z|n
  Tensor wh;  // [H, 3H]
  Tensor bx;  // [3H]
  Tensor bh;  // [3H]
};

// r = s(x Wr + h Ur), z = s(x Wz + h Uz), n = tanh(x Wn + r*(h Un)),
// h' = (1 - z)*n + z*h. x: [D], h: [H].
Tensor gru_cell(const Tensor& x, const Tensor& h, const GruWeights& w);

// Same-padded 1-D convolution along time. x: [T,Cin], w: [K,Cin,Cout], b: [Cout].
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b);

// Attention weights over `positions` encoder steps from K Gaussians:
// raw_j = sum_k softmax(w_logits)_k * exp(-(j - mu_k)^2 / (2 sigma_k^2)), then
// normalized over j. Evaluated in the log domain so distant means never
// underflow to an all-zero row.
Tensor gmm_attention_weights(const Tensor& w_logits, const Tensor& mu, const Tensor& sigma,
                             std::size_t positions);

}  // namespace xtts::num::inline XTTS_PRECISION
