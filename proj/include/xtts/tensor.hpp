#pragma once

// Dense row-major tensors with a reverse-mode tape. A Tensor is a cheap handle
// to a shared node; ops that touch a gradient-carrying input record a backward
// rule on that input's tape. The tape must outlive every tensor recorded on it.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xtts/real.hpp"

namespace xtts::num::inline XTTS_PRECISION {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // empty until a gradient reaches the node
  bool requires_grad = false;
  Tape* tape = nullptr;
  // Embedding-table leaves: rows that received a gradient (sorted, unique after backward).
  std::vector<std::size_t> touched_rows;

  std::vector<Real>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), Real(0));
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<Real> values);
  static Tensor zeros(Shape shape);
  static Tensor scalar(Real v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const Real> values() const { return node_->value; }
  Real operator[](std::size_t i) const { return node_->value[i]; }
  Real item() const;  // scalar (single-element) tensors only

  // Empty when no gradient reached this tensor.
  const std::vector<Real>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  Tape* tape() const { return node_->tape; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Node& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that collects gradients.
  Tensor variable(Shape shape, std::vector<Real> values);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded rule once, newest first.
  // Throws for non-scalar losses, losses not on this tape, or a second call.
  void backward(const Tensor& loss);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return entries_.size(); }

  void record(std::shared_ptr<Node> out, BackwardFn fn);

 private:
  struct Entry {
    std::shared_ptr<Node> out;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  std::vector<std::shared_ptr<Node>> leaves_;
  bool consumed_ = false;
};

}  // namespace xtts::num::inline XTTS_PRECISION
