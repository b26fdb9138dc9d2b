#pragma once

// Dense kernels used by the autodiff layer. Every kernel comes in two
// flavours: a serial reference (`*_ref`) and an OpenMP version (`*_omp`)
// that splits the outer loop across threads. Both evaluate each output
// element with the same operation order, so their results are bit-identical.
// The dispatching entry points pick the OpenMP path for large problems when
// not already inside a parallel region.

#include <cstddef>
#include <span>

namespace santa::kernels {

enum class Trans { N, T };

struct GemmArgs {
  Trans trans_a = Trans::N;
  Trans trans_b = Trans::N;
  std::size_t m = 0;  // rows of op(A) and C
  std::size_t n = 0;  // cols of op(B) and C
  std::size_t k = 0;  // inner dimension
  bool accumulate = false;  // C += op(A)op(B) instead of C = op(A)op(B)
};

// C[m x n] = op(A) op(B). A is stored m x k (N) or k x m (T); B is k x n (N) or n x k (T).
void gemm_ref(const GemmArgs& args, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm_omp(const GemmArgs& args, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b, std::span<double> c);

// Row-wise numerically stable softmax of an rows x cols matrix.
void softmax_rows_ref(std::size_t rows, std::size_t cols, std::span<const double> x, std::span<double> y);
void softmax_rows_omp(std::size_t rows, std::size_t cols, std::span<const double> x, std::span<double> y);
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x, std::span<double> y);

// Problems with at least this many multiply-adds use the OpenMP path.
inline constexpr std::size_t kParallelWorkThreshold = 1u << 16;

}  // namespace santa::kernels
