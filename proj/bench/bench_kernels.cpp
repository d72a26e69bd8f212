#include <benchmark/benchmark.h>

#include <vector>

#include "ofp/kernels.hpp"
#include "ofp/rng.hpp"

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  ofp::Rng rng(seed);
  std::vector<double> v(n);
  rng.fill_normal(v);
  return v;
}

template <bool Parallel>
void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(n * n, 1), b = random_vector(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      ofp::kernels::matmul(a, b, c, n, n, n);
    } else {
      ofp::kernels::serial::matmul(a, b, c, n, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n * n));
}

template <bool Parallel>
void bm_pairwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 8;
  const auto x = random_vector(n * dim, 3), y = random_vector(n * dim, 4);
  for (auto _ : state) {
    double v = Parallel ? ofp::kernels::mean_pairwise_distance(x, n, y, n, dim)
                        : ofp::kernels::serial::mean_pairwise_distance(x, n, y, n, dim);
    benchmark::DoNotOptimize(v);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n));
}

}  // namespace

BENCHMARK(bm_matmul<false>)->Name("matmul/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_matmul<true>)->Name("matmul/openmp")->Arg(64)->Arg(256);
BENCHMARK(bm_pairwise<false>)->Name("pairwise_distance/serial")->Arg(1000)->Arg(4000);
BENCHMARK(bm_pairwise<true>)->Name("pairwise_distance/openmp")->Arg(1000)->Arg(4000);

BENCHMARK_MAIN();
