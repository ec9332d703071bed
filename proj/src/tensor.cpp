#include "xtts/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "xtts/error.hpp"

namespace xtts::num::inline XTTS_PRECISION {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::constant(Shape shape, std::vector<Real> values) {
  if (num::numel(shape) != values.size())
    throw Error(ErrorKind::Shape, "constant: shape " + shape_str(shape) + " holds " +
                                      std::to_string(num::numel(shape)) + " values, got " +
                                      std::to_string(values.size()));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = num::numel(shape);
  return constant(std::move(shape), std::vector<Real>(n, Real(0)));
}

Tensor Tensor::scalar(Real v) { return constant({}, {v}); }

Real Tensor::item() const {
  if (numel() != 1)
    throw Error(ErrorKind::Shape, "item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->value[0];
}

Tensor Tape::variable(Shape shape, std::vector<Real> values) {
  Tensor t = Tensor::constant(std::move(shape), std::move(values));
  t.node()->requires_grad = true;
  t.node()->tape = this;
  leaves_.push_back(t.node());
  return t;
}

void Tape::record(std::shared_ptr<Node> out, BackwardFn fn) {
  if (consumed_) throw Error(ErrorKind::State, "tape already ran backward; start a new tape");
  out->tape = this;
  out->requires_grad = true;
  entries_.push_back({std::move(out), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw Error(ErrorKind::Shape, "backward: loss must be a scalar, got shape " +
                                      (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  if (loss.tape() != this || !loss.requires_grad())
    throw Error(ErrorKind::State, "backward: loss is detached from this tape");
  if (consumed_)
    throw Error(ErrorKind::State, "backward: tape already consumed; re-run the forward pass");
  consumed_ = true;
  loss.node()->ensure_grad()[0] += Real(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->out->grad.empty()) continue;
    it->backward(*it->out);
  }
  for (auto& leaf : leaves_) {
    auto& rows = leaf->touched_rows;
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  }
}

}  // namespace xtts::num::inline XTTS_PRECISION
