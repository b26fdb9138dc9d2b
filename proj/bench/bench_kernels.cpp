// Serial reference vs OpenMP kernels, and serial vs parallel evaluation legs.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "santa/kernels.hpp"
#include "santa/self_augment.hpp"
#include "santa/trainer.hpp"

namespace {

using namespace santa;

std::vector<double> random_vec(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

template <auto Kernel>
void bm_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<double> c(n * n);
  const kernels::GemmArgs args{kernels::Trans::N, kernels::Trans::T, n, n, n, false};
  for (auto _ : state) {
    Kernel(args, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(bm_gemm<kernels::gemm_ref>)->Name("gemm_ref")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_gemm<kernels::gemm_omp>)->Name("gemm_omp")->Arg(64)->Arg(128)->Arg(256);

template <auto Kernel>
void bm_softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0)), cols = std::size_t{512};
  const auto x = random_vec(rows * cols, 3);
  std::vector<double> y(rows * cols);
  for (auto _ : state) {
    Kernel(rows, cols, x, y);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(bm_softmax<kernels::softmax_rows_ref>)->Name("softmax_ref")->Arg(256)->Arg(1024);
BENCHMARK(bm_softmax<kernels::softmax_rows_omp>)->Name("softmax_omp")->Arg(256)->Arg(1024);

struct Fixture {
  World world = generate_world(1, WorldConfig{});
  std::vector<VideoSample> eval = filter_split(world.corpus, Split::eval);
  ModelState model = init_model(model_config_for(world.lexicon, world.corpus, 1));
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void bm_evaluate(benchmark::State& state) {
  const auto& f = fixture();
  const Exec exec = state.range(0) ? Exec::parallel : Exec::serial;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_model(f.model, f.eval, f.world.lexicon, exec));
}
BENCHMARK(bm_evaluate)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void bm_negatives(benchmark::State& state) {
  const auto& f = fixture();
  const Exec exec = state.range(0) ? Exec::parallel : Exec::serial;
  std::vector<const VideoSample*> ptrs;
  for (const auto& s : f.eval) ptrs.push_back(&s);
  const BoundModel m(f.model, nullptr);
  for (auto _ : state) benchmark::DoNotOptimize(generate_negatives(m, ptrs, f.world.lexicon, 0, exec));
}
BENCHMARK(bm_negatives)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
