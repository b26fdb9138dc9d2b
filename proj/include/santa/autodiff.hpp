#pragma once

// Reverse-mode differentiation over dense tensors.
//
// A Tape records every operation whose inputs require gradients, in creation
// order, which is a topological order of the graph. Tape::backward replays the
// records in reverse and visits every node exactly once. Operations whose
// inputs are all constants are evaluated eagerly and are not recorded, so the
// same model code serves training (leaves on a tape) and inference (constants).

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "santa/tensor.hpp"

namespace santa {

class Tape;

namespace detail {
struct Node {
  Tensor value;
  Tensor grad;  // empty until gradient flows into the node
  bool requires_grad = false;
  Tape* tape = nullptr;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
};
}  // namespace detail

class Var {
 public:
  Var() = default;

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  double item() const { return node_->value.item(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tape* tape() const { return node_ ? node_->tape : nullptr; }
  bool defined() const noexcept { return static_cast<bool>(node_); }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  // Gradient accumulated by the last backward pass; zeros if none reached this node.
  Tensor grad() const;

 private:
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend class Tape;
  friend Var constant(Tensor value);
  friend Var make_result(Tensor value, std::initializer_list<Var> inputs, std::function<void(detail::Node&)> fn);
  friend Var make_result_vec(Tensor value, const std::vector<Var>& inputs, std::function<void(detail::Node&)> fn);
};

// Wraps a value that never receives gradients.
Var constant(Tensor value);

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  // Backpropagates d(root)/d(node) into every recorded node. root must be a
  // scalar recorded on this tape. A tape can be replayed only once.
  void backward(const Var& root);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool closed() const noexcept { return closed_; }

 private:
  friend Var make_result(Tensor, std::initializer_list<Var>, std::function<void(detail::Node&)>);
  friend Var make_result_vec(Tensor, const std::vector<Var>&, std::function<void(detail::Node&)>);
  void record(const std::shared_ptr<detail::Node>& node);

  std::vector<std::shared_ptr<detail::Node>> nodes_;
  bool closed_ = false;
};

// Builds an op result; records it on the inputs' tape when any input requires grad.
Var make_result(Tensor value, std::initializer_list<Var> inputs, std::function<void(detail::Node&)> fn);
Var make_result_vec(Tensor value, const std::vector<Var>& inputs, std::function<void(detail::Node&)> fn);

// --- primitives -----------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// X[m x n] + b[n] broadcast over rows.
Var add_rowwise(const Var& x, const Var& b);
Var tanh(const Var& a);

// op(A) op(B); rank-1 operands are treated as a single row. Result is rank 2.
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
Var reshape(const Var& a, Shape shape);

Var softmax(const Var& a);  // last axis
Var log_sum_exp(const Var& v);  // rank-1 -> scalar
// Mean cross-entropy of the rows of `logits` against target indices.
Var cross_entropy(const Var& logits, std::span<const std::size_t> targets);

// Rank-2 mean over axis 0 (-> cols) or axis 1 (-> rows).
Var mean_pool(const Var& a, std::size_t axis);
Var sum(const Var& a);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var gather_rows(const Var& table, std::span<const std::size_t> rows);
Var select_row(const Var& a, std::size_t row);  // -> rank 1
Var element(const Var& v, std::size_t index);  // -> scalar

// Row-wise L2 normalization (rank-1 input is one row).
Var l2_normalize(const Var& a);
Var dot(const Var& a, const Var& b);
Var cosine_similarity(const Var& a, const Var& b);

}  // namespace santa
