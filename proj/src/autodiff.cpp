#include "santa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "santa/errors.hpp"
#include "santa/kernels.hpp"

namespace santa {

using detail::Node;
using kernels::GemmArgs;
using kernels::Trans;

namespace {

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite value");
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Tensor& grad_buffer(Node& n) {
  if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

void accumulate(Node& n, std::span<const double> g) {
  if (!n.requires_grad) return;
  auto& buf = grad_buffer(n).storage();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

Tape* common_tape(std::span<const Var> inputs) {
  Tape* tape = nullptr;
  for (const auto& v : inputs) {
    if (!v.requires_grad()) continue;
    if (tape && v.tape() != tape) throw UsageError("operation mixes variables from different tapes");
    tape = v.tape();
  }
  return tape;
}

}  // namespace

Tensor Var::grad() const {
  if (!node_ || node_->grad.empty()) return Tensor::zeros_like(node_->value);
  return node_->grad;
}

Var constant(Tensor value) {
  require_finite(value, "constant");
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (closed_) throw UsageError("tape already replayed");
  require_finite(value, "leaf");
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  if (requires_grad) {
    n->tape = this;
    record(n);
  }
  return Var(std::move(n));
}

void Tape::record(const std::shared_ptr<Node>& node) {
  if (closed_) throw UsageError("tape already replayed");
  nodes_.push_back(node);
}

void Tape::backward(const Var& root) {
  if (root.value().size() != 1) throw UsageError("backward root must be a scalar, got " + shape_str(root.shape()));
  if (!root.requires_grad()) throw UsageError("backward root does not depend on any leaf requiring grad");
  if (root.tape() != this) throw UsageError("backward root recorded on a different tape");
  if (closed_) throw UsageError("tape already replayed");
  closed_ = true;
  grad_buffer(*root.node_)[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backward && !n.grad.empty()) n.backward(n);
  }
}

Var make_result_vec(Tensor value, const std::vector<Var>& inputs, std::function<void(Node&)> fn) {
  require_finite(value, "forward");
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  Tape* tape = common_tape(inputs);
  if (tape) {
    n->requires_grad = true;
    n->tape = tape;
    n->inputs.reserve(inputs.size());
    for (const auto& v : inputs) n->inputs.push_back(v.node_);
    n->backward = std::move(fn);
    tape->record(n);
  }
  return Var(std::move(n));
}

Var make_result(Tensor value, std::initializer_list<Var> inputs, std::function<void(Node&)> fn) {
  return make_result_vec(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

// --- elementwise ------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad.data());
    accumulate(*self.inputs[1], self.grad.data());
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad.data());
    Tensor neg = self.grad;
    for (auto& g : neg.storage()) g = -g;
    accumulate(*self.inputs[1], neg.data());
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    std::vector<double> ga(self.grad.size()), gb(self.grad.size());
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] = self.grad[i] * bv[i];
      gb[i] = self.grad[i] * av[i];
    }
    accumulate(*self.inputs[0], ga);
    accumulate(*self.inputs[1], gb);
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.storage()) v *= s;
  return make_result(std::move(out), {a}, [s](Node& self) {
    std::vector<double> g(self.grad.storage());
    for (auto& v : g) v *= s;
    accumulate(*self.inputs[0], g);
  });
}

Var add_rowwise(const Var& x, const Var& b) {
  const auto cols = x.value().cols();
  if (b.value().rank() != 1 || b.value().size() != cols)
    throw DimensionError("add_rowwise: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(b.shape()));
  Tensor out = x.value();
  const auto rows = out.rows();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += b.value()[c];
  return make_result(std::move(out), {x, b}, [rows, cols](Node& self) {
    accumulate(*self.inputs[0], self.grad.data());
    std::vector<double> gb(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) gb[c] += self.grad[r * cols + c];
    accumulate(*self.inputs[1], gb);
  });
}

Var tanh(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.storage()) v = std::tanh(v);
  return make_result(std::move(out), {a}, [](Node& self) {
    std::vector<double> g(self.grad.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value[i];
      g[i] = self.grad[i] * (1.0 - y * y);
    }
    accumulate(*self.inputs[0], g);
  });
}

// --- linear algebra ---------------------------------------------------------

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t a_rows = av.rows(), a_cols = av.cols();
  const std::size_t b_rows = bv.rows(), b_cols = bv.cols();
  const std::size_t m = trans_a ? a_cols : a_rows;
  const std::size_t k = trans_a ? a_rows : a_cols;
  const std::size_t kb = trans_b ? b_cols : b_rows;
  const std::size_t n = trans_b ? b_rows : b_cols;
  if (k != kb)
    throw DimensionError("matmul: shape mismatch " + shape_str(av.shape()) + (trans_a ? "^T" : "") + " vs " +
                         shape_str(bv.shape()) + (trans_b ? "^T" : ""));
  const Trans ta = trans_a ? Trans::T : Trans::N;
  const Trans tb = trans_b ? Trans::T : Trans::N;
  Tensor out({m, n});
  kernels::gemm({ta, tb, m, n, k, false}, av.data(), bv.data(), out.data());
  return make_result(std::move(out), {a, b}, [ta, tb, m, n, k](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto dc = self.grad.data();
    if (na.requires_grad) {
      auto& ga = grad_buffer(na);
      const auto bd = nb.value.data();
      if (ta == Trans::N) {
        kernels::gemm({Trans::N, tb == Trans::N ? Trans::T : Trans::N, m, k, n, true}, dc, bd, ga.data());
      } else {
        kernels::gemm({tb == Trans::N ? Trans::N : Trans::T, Trans::T, k, m, n, true}, bd, dc, ga.data());
      }
    }
    if (nb.requires_grad) {
      auto& gb = grad_buffer(nb);
      const auto ad = na.value.data();
      if (tb == Trans::N) {
        kernels::gemm({ta == Trans::N ? Trans::T : Trans::N, Trans::N, k, n, m, true}, ad, dc, gb.data());
      } else {
        kernels::gemm({Trans::T, ta == Trans::N ? Trans::N : Trans::T, n, k, m, true}, dc, ad, gb.data());
      }
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  if (shape_numel(shape) != a.value().size())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  Tensor out(std::move(shape), a.value().storage());
  return make_result(std::move(out), {a}, [](Node& self) { accumulate(*self.inputs[0], self.grad.data()); });
}

// --- normalizing ops --------------------------------------------------------

Var softmax(const Var& a) {
  const auto rows = a.value().rows(), cols = a.value().cols();
  Tensor out(a.shape());
  kernels::softmax_rows(rows, cols, a.value().data(), out.data());
  return make_result(std::move(out), {a}, [rows, cols](Node& self) {
    std::vector<double> g(self.grad.size());
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += self.grad[r * cols + c] * self.value[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        const auto i = r * cols + c;
        g[i] = self.value[i] * (self.grad[i] - s);
      }
    }
    accumulate(*self.inputs[0], g);
  });
}

Var log_sum_exp(const Var& v) {
  if (v.value().rank() != 1) throw DimensionError("log_sum_exp: expected rank-1 input, got " + shape_str(v.shape()));
  const auto& x = v.value();
  const double mx = *std::max_element(x.storage().begin(), x.storage().end());
  double s = 0.0;
  for (double e : x.storage()) s += std::exp(e - mx);
  const double lse = mx + std::log(s);
  return make_result(Tensor::scalar(lse), {v}, [lse](Node& self) {
    const auto& xin = self.inputs[0]->value;
    std::vector<double> g(xin.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[0] * std::exp(xin[i] - lse);
    accumulate(*self.inputs[0], g);
  });
}

Var cross_entropy(const Var& logits, std::span<const std::size_t> targets) {
  const auto rows = logits.value().rows(), cols = logits.value().cols();
  if (targets.size() != rows)
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_str(logits.shape()));
  for (auto t : targets)
    if (t >= cols) throw UsageError("cross_entropy: target index " + std::to_string(t) + " >= vocabulary size " +
                                    std::to_string(cols));
  std::vector<double> probs(rows * cols);
  kernels::softmax_rows(rows, cols, logits.value().data(), probs);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = logits.value().row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double e : row) s += std::exp(e - mx);
    loss += (mx + std::log(s)) - row[targets[r]];
  }
  loss /= static_cast<double>(rows);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return make_result(Tensor::scalar(loss), {logits},
                     [rows, cols, probs = std::move(probs), tgt = std::move(tgt)](Node& self) {
                       const double w = self.grad[0] / static_cast<double>(rows);
                       std::vector<double> g(rows * cols);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c)
                           g[r * cols + c] = w * (probs[r * cols + c] - (c == tgt[r] ? 1.0 : 0.0));
                       accumulate(*self.inputs[0], g);
                     });
}

// --- reductions and reshaping ------------------------------------------------

Var mean_pool(const Var& a, std::size_t axis) {
  if (a.value().rank() != 2) throw DimensionError("mean_pool: expected rank-2 input, got " + shape_str(a.shape()));
  if (axis > 1) throw UsageError("mean_pool: axis must be 0 or 1");
  const auto rows = a.value().rows(), cols = a.value().cols();
  const auto& x = a.value();
  Tensor out({axis == 0 ? cols : rows});
  if (axis == 0) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[c] += x[r * cols + c];
    for (auto& v : out.storage()) v /= static_cast<double>(rows);
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[r] += x[r * cols + c];
      out[r] /= static_cast<double>(cols);
    }
  }
  return make_result(std::move(out), {a}, [rows, cols, axis](Node& self) {
    std::vector<double> g(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        g[r * cols + c] = axis == 0 ? self.grad[c] / static_cast<double>(rows) : self.grad[r] / static_cast<double>(cols);
    accumulate(*self.inputs[0], g);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().storage()) s += v;
  return make_result(Tensor::scalar(s), {a}, [](Node& self) {
    std::vector<double> g(self.inputs[0]->value.size(), self.grad[0]);
    accumulate(*self.inputs[0], g);
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw UsageError("concat: no inputs");
  if (axis > 1) throw UsageError("concat: axis must be 0 or 1");
  std::vector<std::size_t> rows, cols;
  for (const auto& p : parts) {
    rows.push_back(p.value().rows());
    cols.push_back(p.value().cols());
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const bool ok = axis == 0 ? cols[i] == cols[0] : rows[i] == rows[0];
    if (!ok)
      throw DimensionError("concat: shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(parts[i].shape()));
    total += axis == 0 ? rows[i] : cols[i];
  }
  Tensor out = axis == 0 ? Tensor({total, cols[0]}) : Tensor({rows[0], total});
  const auto out_cols = out.cols();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& x = parts[i].value();
    for (std::size_t r = 0; r < rows[i]; ++r)
      for (std::size_t c = 0; c < cols[i]; ++c) {
        const auto dst = axis == 0 ? (offset + r) * out_cols + c : r * out_cols + offset + c;
        out[dst] = x[r * cols[i] + c];
      }
    offset += axis == 0 ? rows[i] : cols[i];
  }
  return make_result_vec(std::move(out), parts, [rows, cols, axis, out_cols](Node& self) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& in = *self.inputs[i];
      if (in.requires_grad) {
        std::vector<double> g(rows[i] * cols[i]);
        for (std::size_t r = 0; r < rows[i]; ++r)
          for (std::size_t c = 0; c < cols[i]; ++c) {
            const auto src = axis == 0 ? (off + r) * out_cols + c : r * out_cols + off + c;
            g[r * cols[i] + c] = self.grad[src];
          }
        accumulate(in, g);
      }
      off += axis == 0 ? rows[i] : cols[i];
    }
  });
}

Var gather_rows(const Var& table, std::span<const std::size_t> rows) {
  const auto& t = table.value();
  const auto n_rows = t.rows(), cols = t.cols();
  if (rows.empty()) throw UsageError("gather_rows: empty index list");
  Tensor out({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n_rows)
      throw DimensionError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " + shape_str(t.shape()));
    std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(rows[i] * cols), cols,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result(std::move(out), {table}, [idx = std::move(idx), cols](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = grad_buffer(in);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) g[idx[i] * cols + c] += self.grad[i * cols + c];
  });
}

Var select_row(const Var& a, std::size_t row) {
  const std::size_t idx[] = {row};
  return reshape(gather_rows(a, idx), {a.value().cols()});
}

Var element(const Var& v, std::size_t index) {
  if (index >= v.value().size())
    throw DimensionError("element: index " + std::to_string(index) + " out of range for " + shape_str(v.shape()));
  return make_result(Tensor::scalar(v.value()[index]), {v}, [index](Node& self) {
    Node& in = *self.inputs[0];
    grad_buffer(in)[index] += self.grad[0];
  });
}

// --- similarity -------------------------------------------------------------

Var l2_normalize(const Var& a) {
  const auto rows = a.value().rows(), cols = a.value().cols();
  Tensor out = a.value();
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += out[r * cols + c] * out[r * cols + c];
    norms[r] = std::sqrt(s);
    if (norms[r] <= 1e-12) throw NumericError("l2_normalize: zero-norm row " + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= norms[r];
  }
  return make_result(std::move(out), {a}, [rows, cols, norms = std::move(norms)](Node& self) {
    // d(x/|x|) = (g - y (y.g)) / |x|
    std::vector<double> g(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      double yg = 0.0;
      for (std::size_t c = 0; c < cols; ++c) yg += self.value[r * cols + c] * self.grad[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        const auto i = r * cols + c;
        g[i] = (self.grad[i] - self.value[i] * yg) / norms[r];
      }
    }
    accumulate(*self.inputs[0], g);
  });
}

Var dot(const Var& a, const Var& b) {
  if (a.value().size() != b.value().size())
    throw DimensionError("dot: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) s += a.value()[i] * b.value()[i];
  return make_result(Tensor::scalar(s), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    std::vector<double> ga(av.size()), gb(bv.size());
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] = self.grad[0] * bv[i];
      gb[i] = self.grad[0] * av[i];
    }
    accumulate(*self.inputs[0], ga);
    accumulate(*self.inputs[1], gb);
  });
}

Var cosine_similarity(const Var& a, const Var& b) {
  if (a.value().rank() != 1 || a.shape() != b.shape())
    throw DimensionError("cosine_similarity: expected equal-length vectors, got " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  return dot(l2_normalize(a), l2_normalize(b));
}

}  // namespace santa
