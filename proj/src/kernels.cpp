#include "santa/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <omp.h>

namespace santa::kernels {
namespace {

inline double elem_a(const GemmArgs& g, std::span<const double> a, std::size_t i, std::size_t p) {
  return g.trans_a == Trans::N ? a[i * g.k + p] : a[p * g.m + i];
}

void gemm_row(const GemmArgs& g, std::span<const double> a, std::span<const double> b, std::span<double> c,
              std::size_t i) {
  double* out = c.data() + i * g.n;
  if (!g.accumulate) std::fill(out, out + g.n, 0.0);
  if (g.trans_b == Trans::N) {
    for (std::size_t p = 0; p < g.k; ++p) {
      const double aip = elem_a(g, a, i, p);
      const double* brow = b.data() + p * g.n;
      for (std::size_t j = 0; j < g.n; ++j) out[j] += aip * brow[j];
    }
  } else {
    for (std::size_t j = 0; j < g.n; ++j) {
      const double* brow = b.data() + j * g.k;
      double acc = out[j];
      for (std::size_t p = 0; p < g.k; ++p) acc += elem_a(g, a, i, p) * brow[p];
      out[j] = acc;
    }
  }
}

void softmax_row(std::size_t cols, const double* x, double* y) {
  double mx = x[0];
  for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
}

}  // namespace

void gemm_ref(const GemmArgs& args, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < args.m; ++i) gemm_row(args, a, b, c, i);
}

void gemm_omp(const GemmArgs& args, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  const auto m = static_cast<long>(args.m);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < m; ++i) gemm_row(args, a, b, c, static_cast<std::size_t>(i));
}

void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  if (args.m * args.n * args.k >= kParallelWorkThreshold && args.m > 1 && !omp_in_parallel())
    gemm_omp(args, a, b, c);
  else
    gemm_ref(args, a, b, c);
}

void softmax_rows_ref(std::size_t rows, std::size_t cols, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) softmax_row(cols, x.data() + r * cols, y.data() + r * cols);
}

void softmax_rows_omp(std::size_t rows, std::size_t cols, std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < n; ++r) {
    const auto off = static_cast<std::size_t>(r) * cols;
    softmax_row(cols, x.data() + off, y.data() + off);
  }
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x, std::span<double> y) {
  if (rows * cols >= kParallelWorkThreshold && rows > 1 && !omp_in_parallel())
    softmax_rows_omp(rows, cols, x, y);
  else
    softmax_rows_ref(rows, cols, x, y);
}

}  // namespace santa::kernels
