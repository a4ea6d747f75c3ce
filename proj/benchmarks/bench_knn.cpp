#include <benchmark/benchmark.h>

#include "lnforge/metrics.hpp"
#include "lnforge/rng.hpp"

namespace {

lnforge::FeatureSet gaussian(std::size_t n, std::size_t dim, std::uint64_t seed) {
  lnforge::Rng rng(seed);
  lnforge::FeatureSet s;
  s.dim = dim;
  std::vector<double> v(dim);
  for (std::size_t r = 0; r < n; ++r) {
    for (double& x : v) x = rng.normal();
    s.add(v);
  }
  return s;
}

void BM_KnnRadius(benchmark::State& state) {
  const auto s = gaussian(static_cast<std::size_t>(state.range(0)), 32, 1);
  for (auto _ : state) benchmark::DoNotOptimize(lnforge::knn_radius(s, 3));
}
BENCHMARK(BM_KnnRadius)->Arg(100)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_EvaluateIpr(benchmark::State& state) {
  const auto real = gaussian(static_cast<std::size_t>(state.range(0)), 32, 2);
  const auto fake = gaussian(static_cast<std::size_t>(state.range(0)), 32, 3);
  for (auto _ : state) benchmark::DoNotOptimize(lnforge::evaluate_ipr(real, fake, 3));
}
BENCHMARK(BM_EvaluateIpr)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
