#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "santa/autodiff.hpp"

namespace santa {

// Builds a scalar objective on `tape` from one leaf per parameter tensor.
using ScalarObjective = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares reverse-mode gradients against central differences over every
// coordinate of every parameter. Error per coordinate is
// |analytic - numeric| / max(1, |numeric|); the maximum is returned.
// Throws CheckError if two evaluations at the same point disagree.
GradCheckResult grad_check(const ScalarObjective& f, std::span<const Tensor> params, double h = 1e-5);

}  // namespace santa
