#include <benchmark/benchmark.h>

#include "lnforge/rng.hpp"
#include "lnforge/sdf.hpp"

namespace {

lnforge::Mask sparse_mask(std::int64_t n, double density) {
  lnforge::Rng rng(1);
  lnforge::Mask m({n, n, n}, {});
  for (auto& v : m.values()) v = rng.uniform() < density;
  return m;
}

void BM_EdtSquared(benchmark::State& state) {
  const lnforge::Mask m = sparse_mask(state.range(0), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(lnforge::edt_squared(m));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.size()));
}
BENCHMARK(BM_EdtSquared)->Arg(16)->Arg(32)->Arg(64);

void BM_MaskToTsdf(benchmark::State& state) {
  const lnforge::Mask m = sparse_mask(state.range(0), 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(lnforge::mask_to_tsdf(m));
}
BENCHMARK(BM_MaskToTsdf)->Arg(20)->Arg(36);

}  // namespace
