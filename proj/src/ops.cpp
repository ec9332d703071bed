#include "xtts/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xtts/error.hpp"
#include "xtts/kernels.hpp"

namespace xtts::num::inline XTTS_PRECISION {
namespace {

using NodePtr = std::shared_ptr<Node>;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorKind::Shape, std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] void shape_error(const char* op, const std::string& what) {
  throw Error(ErrorKind::Shape, std::string(op) + ": " + what);
}

Tape* common_tape(std::initializer_list<const Tensor*> inputs, const char* op) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->defined()) shape_error(op, "undefined input tensor");
    if (!t->requires_grad()) continue;
    if (tape && t->tape() != tape) shape_error(op, "inputs recorded on different tapes");
    tape = t->tape();
  }
  return tape;
}

Tensor finish(Shape shape, std::vector<Real> value, Tape* tape, Tape::BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (tape) tape->record(node, std::move(fn));
  return Tensor(std::move(node));
}

std::size_t resolve_axis(int axis, std::size_t rank, const char* op) {
  const int r = static_cast<int>(rank);
  const int ax = axis < 0 ? r + axis : axis;
  if (ax < 0 || ax >= r) shape_error(op, "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  return static_cast<std::size_t>(ax);
}

// Splits a shape around `axis` into (outer, length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit sp;
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  sp.length = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}

bool is_suffix(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.begin(), b.end(), a.end() - static_cast<std::ptrdiff_t>(b.size()));
}

enum class Binary { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind, const char* op) {
  Tape* tape = common_tape({&a, &b}, op);
  if (!is_suffix(a.shape(), b.shape())) shape_error(op, a.shape(), b.shape());
  const std::size_t inner = b.numel();
  const std::size_t outer = inner ? a.numel() / inner : 0;
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<Real> out(a.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t idx = o * inner + i;
      switch (kind) {
        case Binary::Add: out[idx] = av[idx] + bv[i]; break;
        case Binary::Sub: out[idx] = av[idx] - bv[i]; break;
        case Binary::Mul: out[idx] = av[idx] * bv[i]; break;
      }
    }
  }
  NodePtr an = a.node(), bn = b.node();
  return finish(a.shape(), std::move(out), tape, [an, bn, kind, outer, inner](Node& y) {
    if (an->requires_grad) {
      auto& ga = an->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t idx = o * inner + i;
          ga[idx] += kind == Binary::Mul ? y.grad[idx] * bn->value[i] : y.grad[idx];
        }
    }
    if (bn->requires_grad) {
      auto& gb = bn->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t idx = o * inner + i;
          switch (kind) {
            case Binary::Add: gb[i] += y.grad[idx]; break;
            case Binary::Sub: gb[i] -= y.grad[idx]; break;
            case Binary::Mul: gb[i] += y.grad[idx] * an->value[idx]; break;
          }
        }
    }
  });
}

// Elementwise map whose derivative is expressed through the input x and output y.
template <class F, class D>
Tensor unary(const Tensor& a, const char* op, F f, D dfdx) {
  Tape* tape = common_tape({&a}, op);
  std::vector<Real> out(a.numel());
  const auto& av = a.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  NodePtr an = a.node();
  return finish(a.shape(), std::move(out), tape, [an, dfdx](Node& y) {
    auto& ga = an->ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += y.grad[i] * dfdx(an->value[i], y.value[i]);
  });
}

Real stable_softplus(Real x) { return std::max(x, Real(0)) + std::log1p(std::exp(-std::abs(x))); }
Real stable_sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

void check_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape* tape = common_tape({&a, &b}, "matmul");
  if (b.rank() != 2 || (a.rank() != 1 && a.rank() != 2)) shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.rank() == 1 ? 1 : a.dim(0);
  const std::size_t k = a.rank() == 1 ? a.dim(0) : a.dim(1);
  const std::size_t n = b.dim(1);
  if (b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
  std::vector<Real> out(m * n);
  const auto exec = kernels::default_exec();
  kernels::gemm(exec, false, false, m, n, k, a.node()->value.data(), b.node()->value.data(), out.data(), false);
  Shape shape = a.rank() == 1 ? Shape{n} : Shape{m, n};
  NodePtr an = a.node(), bn = b.node();
  return finish(std::move(shape), std::move(out), tape, [an, bn, m, n, k, exec](Node& y) {
    if (an->requires_grad)  // dA = dY * B^T
      kernels::gemm(exec, false, true, m, k, n, y.grad.data(), bn->value.data(), an->ensure_grad().data(), true);
    if (bn->requires_grad)  // dB = A^T * dY
      kernels::gemm(exec, true, false, k, n, m, an->value.data(), y.grad.data(), bn->ensure_grad().data(), true);
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Mul, "mul"); }

Tensor scale(const Tensor& a, Real c) {
  return unary(a, "scale", [c](Real x) { return c * x; }, [c](Real, Real) { return c; });
}

Tensor add_scalar(const Tensor& a, Real c) {
  return unary(a, "add_scalar", [c](Real x) { return x + c; }, [](Real, Real) { return Real(1); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, "tanh", [](Real x) { return std::tanh(x); }, [](Real, Real y) { return Real(1) - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid", stable_sigmoid, [](Real, Real y) { return y * (Real(1) - y); });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](Real x) { return std::exp(x); }, [](Real, Real y) { return y; });
}

Tensor softplus(const Tensor& a) {
  return unary(a, "softplus", stable_softplus, [](Real x, Real) { return stable_sigmoid(x); });
}

Tensor softmax(const Tensor& a, int axis) {
  Tape* tape = common_tape({&a}, "softmax");
  const std::size_t ax = resolve_axis(axis, a.rank(), "softmax");
  const AxisSplit sp = split_at(a.shape(), ax);
  const auto& av = a.node()->value;
  std::vector<Real> out(av.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      auto at = [&](std::size_t l) { return (o * sp.length + l) * sp.inner + i; };
      Real mx = av[at(0)];
      for (std::size_t l = 1; l < sp.length; ++l) mx = std::max(mx, av[at(l)]);
      Real total = 0;
      for (std::size_t l = 0; l < sp.length; ++l) total += out[at(l)] = std::exp(av[at(l)] - mx);
      for (std::size_t l = 0; l < sp.length; ++l) out[at(l)] /= total;
    }
  }
  NodePtr an = a.node();
  return finish(a.shape(), std::move(out), tape, [an, sp](Node& y) {
    auto& ga = an->ensure_grad();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        auto at = [&](std::size_t l) { return (o * sp.length + l) * sp.inner + i; };
        Real dot = 0;
        for (std::size_t l = 0; l < sp.length; ++l) dot += y.grad[at(l)] * y.value[at(l)];
        for (std::size_t l = 0; l < sp.length; ++l) ga[at(l)] += y.value[at(l)] * (y.grad[at(l)] - dot);
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  Tape* tape = common_tape({&a}, "sum");
  Real total = 0;
  for (Real v : a.values()) total += v;
  NodePtr an = a.node();
  return finish({}, {total}, tape, [an](Node& y) {
    auto& ga = an->ensure_grad();
    for (Real& g : ga) g += y.grad[0];
  });
}

Tensor sum(const Tensor& a, int axis) {
  Tape* tape = common_tape({&a}, "sum");
  const std::size_t ax = resolve_axis(axis, a.rank(), "sum");
  const AxisSplit sp = split_at(a.shape(), ax);
  Shape shape = a.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(ax));
  std::vector<Real> out(sp.outer * sp.inner, Real(0));
  const auto& av = a.node()->value;
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t l = 0; l < sp.length; ++l)
      for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += av[(o * sp.length + l) * sp.inner + i];
  NodePtr an = a.node();
  return finish(std::move(shape), std::move(out), tape, [an, sp](Node& y) {
    auto& ga = an->ensure_grad();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t l = 0; l < sp.length; ++l)
        for (std::size_t i = 0; i < sp.inner; ++i) ga[(o * sp.length + l) * sp.inner + i] += y.grad[o * sp.inner + i];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) shape_error("mean", "empty tensor");
  return scale(sum(a), Real(1) / static_cast<Real>(a.numel()));
}

Tensor mean(const Tensor& a, int axis) {
  const std::size_t ax = resolve_axis(axis, a.rank(), "mean");
  return scale(sum(a, axis), Real(1) / static_cast<Real>(a.dim(ax)));
}

Tensor mse(const Tensor& a, const Tensor& b) {
  Tape* tape = common_tape({&a, &b}, "mse");
  check_same(a, b, "mse");
  const std::size_t n = a.numel();
  if (n == 0) shape_error("mse", "empty tensors");
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) total += (av[i] - bv[i]) * (av[i] - bv[i]);
  NodePtr an = a.node(), bn = b.node();
  return finish({}, {total / static_cast<Real>(n)}, tape, [an, bn, n](Node& y) {
    const Real c = Real(2) * y.grad[0] / static_cast<Real>(n);
    if (an->requires_grad) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[i] += c * (an->value[i] - bn->value[i]);
    }
    if (bn->requires_grad) {
      auto& g = bn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[i] -= c * (an->value[i] - bn->value[i]);
    }
  });
}

Tensor l1(const Tensor& a, const Tensor& b) {
  Tape* tape = common_tape({&a, &b}, "l1");
  check_same(a, b, "l1");
  const std::size_t n = a.numel();
  if (n == 0) shape_error("l1", "empty tensors");
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) total += std::abs(av[i] - bv[i]);
  NodePtr an = a.node(), bn = b.node();
  return finish({}, {total / static_cast<Real>(n)}, tape, [an, bn, n](Node& y) {
    const Real c = y.grad[0] / static_cast<Real>(n);
    auto sign = [](Real d) { return d > 0 ? Real(1) : (d < 0 ? Real(-1) : Real(0)); };
    if (an->requires_grad) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[i] += c * sign(an->value[i] - bn->value[i]);
    }
    if (bn->requires_grad) {
      auto& g = bn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[i] -= c * sign(an->value[i] - bn->value[i]);
    }
  });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  Tape* tape = common_tape({&logits, &targets}, "bce_with_logits");
  check_same(logits, targets, "bce_with_logits");
  const std::size_t n = logits.numel();
  if (n == 0) shape_error("bce_with_logits", "empty tensors");
  const auto& x = logits.node()->value;
  const auto& t = targets.node()->value;
  // max(x,0) - x t + log(1 + e^{-|x|})
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) total += std::max(x[i], Real(0)) - x[i] * t[i] + std::log1p(std::exp(-std::abs(x[i])));
  NodePtr xn = logits.node(), tn = targets.node();
  return finish({}, {total / static_cast<Real>(n)}, tape, [xn, tn, n](Node& y) {
    const Real c = y.grad[0] / static_cast<Real>(n);
    if (xn->requires_grad) {
      auto& g = xn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[i] += c * (stable_sigmoid(xn->value[i]) - tn->value[i]);
    }
    if (tn->requires_grad) {
      auto& g = tn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[i] -= c * xn->value[i];
    }
  });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) shape_error("concat", "no inputs");
  const std::size_t rank = parts[0].rank();
  const std::size_t ax = resolve_axis(axis, rank, "concat");
  Tape* tape = nullptr;
  std::size_t total = 0;
  std::vector<NodePtr> nodes;
  std::vector<std::size_t> lengths;
  for (const Tensor& p : parts) {
    Tape* t = common_tape({&p}, "concat");
    if (t) {
      if (tape && tape != t) shape_error("concat", "inputs recorded on different tapes");
      tape = t;
    }
    if (p.rank() != rank) shape_error("concat", parts[0].shape(), p.shape());
    for (std::size_t d = 0; d < rank; ++d)
      if (d != ax && p.dim(d) != parts[0].dim(d)) shape_error("concat", parts[0].shape(), p.shape());
    total += p.dim(ax);
    lengths.push_back(p.dim(ax));
    nodes.push_back(p.node());
  }
  Shape shape = parts[0].shape();
  shape[ax] = total;
  const AxisSplit sp = split_at(shape, ax);
  std::vector<Real> out(numel(shape));
  std::size_t at = 0;
  for (std::size_t p = 0; p < nodes.size(); ++p) {
    const std::size_t len = lengths[p] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(nodes[p]->value.begin() + static_cast<std::ptrdiff_t>(o * len), len,
                  out.begin() + static_cast<std::ptrdiff_t>(o * sp.length * sp.inner + at));
    at += len;
  }
  return finish(std::move(shape), std::move(out), tape, [nodes, lengths, sp](Node& y) {
    std::size_t at = 0;
    for (std::size_t p = 0; p < nodes.size(); ++p) {
      const std::size_t len = lengths[p] * sp.inner;
      if (nodes[p]->requires_grad) {
        auto& g = nodes[p]->ensure_grad();
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t i = 0; i < len; ++i) g[o * len + i] += y.grad[o * sp.length * sp.inner + at + i];
      }
      at += len;
    }
  });
}

Tensor concat(std::initializer_list<Tensor> parts, int axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t length) {
  Tape* tape = common_tape({&a}, "slice");
  const std::size_t ax = resolve_axis(axis, a.rank(), "slice");
  if (start + length > a.dim(ax))
    shape_error("slice", "range [" + std::to_string(start) + "," + std::to_string(start + length) +
                             ") exceeds " + shape_str(a.shape()));
  const AxisSplit sp = split_at(a.shape(), ax);
  Shape shape = a.shape();
  shape[ax] = length;
  std::vector<Real> out(numel(shape));
  const auto& av = a.node()->value;
  const std::size_t len = length * sp.inner;
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>((o * sp.length + start) * sp.inner), len,
                out.begin() + static_cast<std::ptrdiff_t>(o * len));
  NodePtr an = a.node();
  return finish(std::move(shape), std::move(out), tape, [an, sp, start, len](Node& y) {
    auto& g = an->ensure_grad();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < len; ++i) g[(o * sp.length + start) * sp.inner + i] += y.grad[o * len + i];
  });
}

Tensor row(const Tensor& a, std::size_t index) {
  if (a.rank() != 2) shape_error("row", "expected rank 2, got " + shape_str(a.shape()));
  return reshape(slice(a, 0, index, 1), {a.dim(1)});
}

Tensor stack(std::span<const Tensor> rows) {
  if (rows.empty()) shape_error("stack", "no inputs");
  std::vector<Tensor> expanded;
  expanded.reserve(rows.size());
  for (const Tensor& r : rows) {
    if (r.rank() != 1) shape_error("stack", "expected rank-1 rows, got " + shape_str(r.shape()));
    expanded.push_back(reshape(r, {1, r.dim(0)}));
  }
  return concat(std::span<const Tensor>(expanded), 0);
}

Tensor repeat_rows(const Tensor& v, std::size_t times) {
  Tape* tape = common_tape({&v}, "repeat_rows");
  if (v.rank() != 1) shape_error("repeat_rows", "expected rank 1, got " + shape_str(v.shape()));
  const std::size_t d = v.dim(0);
  std::vector<Real> out(times * d);
  for (std::size_t t = 0; t < times; ++t)
    std::copy(v.values().begin(), v.values().end(), out.begin() + static_cast<std::ptrdiff_t>(t * d));
  NodePtr vn = v.node();
  return finish({times, d}, std::move(out), tape, [vn, times, d](Node& y) {
    auto& g = vn->ensure_grad();
    for (std::size_t t = 0; t < times; ++t)
      for (std::size_t i = 0; i < d; ++i) g[i] += y.grad[t * d + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  Tape* tape = common_tape({&a}, "reshape");
  if (numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
  NodePtr an = a.node();
  return finish(std::move(shape), a.node()->value, tape, [an](Node& y) {
    auto& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += y.grad[i];
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  Tape* tape = common_tape({&table}, "embedding_lookup");
  if (table.rank() != 2) shape_error("embedding_lookup", "table must be rank 2, got " + shape_str(table.shape()));
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  std::vector<Real> out(ids.size() * width);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= vocab)
      throw Error(ErrorKind::Data, "embedding_lookup: id " + std::to_string(ids[t]) + " out of range for " +
                                       std::to_string(vocab) + " rows");
    std::copy_n(table.values().begin() + static_cast<std::ptrdiff_t>(ids[t] * width), width,
                out.begin() + static_cast<std::ptrdiff_t>(t * width));
  }
  NodePtr tn = table.node();
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  return finish({ids.size(), width}, std::move(out), tape, [tn, idv, width](Node& y) {
    auto& g = tn->ensure_grad();
    for (std::size_t t = 0; t < idv.size(); ++t) {
      for (std::size_t i = 0; i < width; ++i) g[idv[t] * width + i] += y.grad[t * width + i];
      tn->touched_rows.push_back(idv[t]);
    }
  });
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruWeights& w) {
  Tape* tape = common_tape({&x, &h, &w.wx, &w.wh, &w.bx, &w.bh}, "gru_cell");
  if (x.rank() != 1 || h.rank() != 1) shape_error("gru_cell", x.shape(), h.shape());
  const std::size_t d = x.dim(0), hd = h.dim(0), g3 = 3 * hd;
  if (w.wx.shape() != Shape{d, g3}) shape_error("gru_cell", x.shape(), w.wx.shape());
  if (w.wh.shape() != Shape{hd, g3}) shape_error("gru_cell", h.shape(), w.wh.shape());
  if (w.bx.shape() != Shape{g3} || w.bh.shape() != Shape{g3}) shape_error("gru_cell", w.bx.shape(), w.bh.shape());
  const auto exec = kernels::default_exec();
  std::vector<Real> gx(w.bx.values().begin(), w.bx.values().end());
  std::vector<Real> gh(w.bh.values().begin(), w.bh.values().end());
  kernels::gemm(exec, false, false, 1, g3, d, x.node()->value.data(), w.wx.node()->value.data(), gx.data(), true);
  kernels::gemm(exec, false, false, 1, g3, hd, h.node()->value.data(), w.wh.node()->value.data(), gh.data(), true);
  // saved: r | z | n | gh_n
  std::vector<Real> saved(4 * hd);
  std::vector<Real> out(hd);
  const auto& hv = h.node()->value;
  for (std::size_t i = 0; i < hd; ++i) {
    const Real r = stable_sigmoid(gx[i] + gh[i]);
    const Real z = stable_sigmoid(gx[hd + i] + gh[hd + i]);
    const Real n = std::tanh(gx[2 * hd + i] + r * gh[2 * hd + i]);
    saved[i] = r;
    saved[hd + i] = z;
    saved[2 * hd + i] = n;
    saved[3 * hd + i] = gh[2 * hd + i];
    out[i] = (Real(1) - z) * n + z * hv[i];
  }
  NodePtr xn = x.node(), hn = h.node(), wxn = w.wx.node(), whn = w.wh.node(), bxn = w.bx.node(), bhn = w.bh.node();
  return finish({hd}, std::move(out), tape,
                [xn, hn, wxn, whn, bxn, bhn, saved = std::move(saved), d, hd, g3, exec](Node& y) {
    std::vector<Real> dgx(g3), dgh(g3), dh_direct(hd);
    for (std::size_t i = 0; i < hd; ++i) {
      const Real r = saved[i], z = saved[hd + i], n = saved[2 * hd + i], ghn = saved[3 * hd + i];
      const Real dy = y.grad[i];
      const Real dn = dy * (Real(1) - z);
      const Real dz = dy * (hn->value[i] - n);
      dh_direct[i] = dy * z;
      const Real dan = dn * (Real(1) - n * n);
      const Real dr = dan * ghn;
      const Real dar = dr * r * (Real(1) - r);
      const Real daz = dz * z * (Real(1) - z);
      dgx[i] = dar;
      dgx[hd + i] = daz;
      dgx[2 * hd + i] = dan;
      dgh[i] = dar;
      dgh[hd + i] = daz;
      dgh[2 * hd + i] = dan * r;
    }
    if (xn->requires_grad)
      kernels::gemm(exec, false, true, 1, d, g3, dgx.data(), wxn->value.data(), xn->ensure_grad().data(), true);
    if (wxn->requires_grad)
      kernels::gemm(exec, true, false, d, g3, 1, xn->value.data(), dgx.data(), wxn->ensure_grad().data(), true);
    if (bxn->requires_grad) {
      auto& g = bxn->ensure_grad();
      for (std::size_t i = 0; i < g3; ++i) g[i] += dgx[i];
    }
    if (hn->requires_grad) {
      auto& g = hn->ensure_grad();
      for (std::size_t i = 0; i < hd; ++i) g[i] += dh_direct[i];
      kernels::gemm(exec, false, true, 1, hd, g3, dgh.data(), whn->value.data(), g.data(), true);
    }
    if (whn->requires_grad)
      kernels::gemm(exec, true, false, hd, g3, 1, hn->value.data(), dgh.data(), whn->ensure_grad().data(), true);
    if (bhn->requires_grad) {
      auto& g = bhn->ensure_grad();
      for (std::size_t i = 0; i < g3; ++i) g[i] += dgh[i];
    }
  });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tape* tape = common_tape({&x, &w, &b}, "conv1d");
  if (x.rank() != 2 || w.rank() != 3 || w.dim(1) != x.dim(1)) shape_error("conv1d", x.shape(), w.shape());
  if (w.dim(0) % 2 == 0) shape_error("conv1d", "kernel width must be odd, got " + std::to_string(w.dim(0)));
  if (b.shape() != Shape{w.dim(2)}) shape_error("conv1d", w.shape(), b.shape());
  const std::size_t steps = x.dim(0), c_in = x.dim(1), c_out = w.dim(2), kernel = w.dim(0);
  const auto exec = kernels::default_exec();
  std::vector<Real> out(steps * c_out);
  kernels::conv1d_forward(exec, steps, c_in, c_out, kernel, x.node()->value.data(), w.node()->value.data(),
                          b.node()->value.data(), out.data());
  NodePtr xn = x.node(), wn = w.node(), bn = b.node();
  return finish({steps, c_out}, std::move(out), tape, [xn, wn, bn, steps, c_in, c_out, kernel, exec](Node& y) {
    kernels::conv1d_backward(exec, steps, c_in, c_out, kernel, xn->value.data(), wn->value.data(), y.grad.data(),
                             xn->requires_grad ? xn->ensure_grad().data() : nullptr,
                             wn->requires_grad ? wn->ensure_grad().data() : nullptr,
                             bn->requires_grad ? bn->ensure_grad().data() : nullptr);
  });
}

Tensor gmm_attention_weights(const Tensor& w_logits, const Tensor& mu, const Tensor& sigma, std::size_t positions) {
  Tape* tape = common_tape({&w_logits, &mu, &sigma}, "gmm_attention_weights");
  if (w_logits.rank() != 1 || mu.shape() != w_logits.shape() || sigma.shape() != w_logits.shape())
    shape_error("gmm_attention_weights", w_logits.shape(), mu.shape());
  if (positions == 0) shape_error("gmm_attention_weights", "need at least one position");
  const std::size_t k = w_logits.dim(0);
  const auto& wl = w_logits.node()->value;
  const auto& m = mu.node()->value;
  const auto& s = sigma.node()->value;
  for (Real v : s)
    if (!(v > 0)) shape_error("gmm_attention_weights", "sigma must be positive");
  // s_jk = wl_k - (j - mu_k)^2 / (2 sigma_k^2); L_j = logsumexp_k s_jk; alpha = softmax_j L.
  std::vector<Real> resp(positions * k);  // p_jk = exp(s_jk - L_j)
  std::vector<Real> lse(positions);
  for (std::size_t j = 0; j < positions; ++j) {
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const Real dj = static_cast<Real>(j) - m[c];
      const Real sjk = wl[c] - dj * dj / (Real(2) * s[c] * s[c]);
      resp[j * k + c] = sjk;
      mx = std::max(mx, sjk);
    }
    Real total = 0;
    for (std::size_t c = 0; c < k; ++c) total += std::exp(resp[j * k + c] - mx);
    lse[j] = mx + std::log(total);
    for (std::size_t c = 0; c < k; ++c) resp[j * k + c] = std::exp(resp[j * k + c] - lse[j]);
  }
  const Real top = *std::max_element(lse.begin(), lse.end());
  std::vector<Real> alpha(positions);
  Real total = 0;
  for (std::size_t j = 0; j < positions; ++j) total += alpha[j] = std::exp(lse[j] - top);
  for (Real& a : alpha) a /= total;
  NodePtr wn = w_logits.node(), mn = mu.node(), sn = sigma.node();
  return finish({positions}, std::move(alpha), tape, [wn, mn, sn, resp = std::move(resp), k, positions](Node& y) {
    Real dot = 0;
    for (std::size_t j = 0; j < positions; ++j) dot += y.grad[j] * y.value[j];
    std::vector<Real> dw(k, 0), dm(k, 0), ds(k, 0);
    for (std::size_t j = 0; j < positions; ++j) {
      const Real dl = y.value[j] * (y.grad[j] - dot);
      for (std::size_t c = 0; c < k; ++c) {
        const Real dsjk = dl * resp[j * k + c];
        const Real sig = sn->value[c];
        const Real dj = static_cast<Real>(j) - mn->value[c];
        dw[c] += dsjk;
        dm[c] += dsjk * dj / (sig * sig);
        ds[c] += dsjk * dj * dj / (sig * sig * sig);
      }
    }
    auto push = [k](const NodePtr& n, const std::vector<Real>& g) {
      if (!n->requires_grad) return;
      auto& acc = n->ensure_grad();
      for (std::size_t c = 0; c < k; ++c) acc[c] += g[c];
    };
    push(wn, dw);
    push(mn, dm);
    push(sn, ds);
  });
}

}  // namespace xtts::num::inline XTTS_PRECISION
