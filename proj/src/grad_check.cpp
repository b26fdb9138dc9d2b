#include "santa/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "santa/errors.hpp"

namespace santa {
namespace {

double evaluate(const ScalarObjective& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.leaf(p, false));
  return f(tape, leaves).item();
}

}  // namespace

GradCheckResult grad_check(const ScalarObjective& f, std::span<const Tensor> params, double h) {
  if (!(h >= 1e-6 && h <= 1e-3)) throw UsageError("grad_check: step h must lie in [1e-6, 1e-3]");

  std::vector<Tensor> point(params.begin(), params.end());

  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const auto& p : point) leaves.push_back(tape.leaf(p, true));
  const Var root = f(tape, leaves);
  if (root.value().size() != 1) throw UsageError("grad_check: objective must be scalar");
  const double base = root.item();
  if (root.requires_grad()) tape.backward(root);

  const double again = evaluate(f, point);
  const double third = evaluate(f, point);
  if (again != base || third != base)
    throw CheckError("grad_check: objective is not deterministic (" + std::to_string(base) + " vs " +
                     std::to_string(again) + ")");

  GradCheckResult result;
  for (std::size_t p = 0; p < point.size(); ++p) {
    const Tensor analytic = leaves[p].grad();
    for (std::size_t i = 0; i < point[p].size(); ++i) {
      const double orig = point[p][i];
      point[p][i] = orig + h;
      const double up = evaluate(f, point);
      point[p][i] = orig - h;
      const double down = evaluate(f, point);
      point[p][i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      ++result.coordinates;
      if (err > result.max_rel_error || result.coordinates == 1) {
        result.max_rel_error = err;
        result.worst_param = p;
        result.worst_index = i;
        result.worst_analytic = analytic[i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace santa
