#include <benchmark/benchmark.h>

#include "lnforge/codec.hpp"
#include "lnforge/phantom.hpp"

namespace {

std::vector<lnforge::TsdfGrid> toy_grids(std::size_t n) {
  std::vector<lnforge::TsdfGrid> out;
  for (const auto& m : lnforge::make_toy_family(n, 3, {})) out.push_back(lnforge::mask_to_tsdf(m));
  return out;
}

void BM_FitCodec(benchmark::State& state) {
  const auto grids = toy_grids(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(lnforge::fit_codec(grids, 32));
}
BENCHMARK(BM_FitCodec)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_EncodeDecode(benchmark::State& state) {
  const auto grids = toy_grids(100);
  const lnforge::LinearCodec c = lnforge::fit_codec(grids, 32);
  std::size_t n = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lnforge::decode(c, lnforge::encode(c, grids[n])));
    n = (n + 1) % grids.size();
  }
}
BENCHMARK(BM_EncodeDecode);

}  // namespace
