#include <benchmark/benchmark.h>

#include "lnforge/diffusion.hpp"

namespace {

void BM_DiffusionLossBatch(benchmark::State& state) {
  lnforge::Rng rng(1);
  const lnforge::DenoiserNet net = lnforge::make_denoiser(32, 0, {128, 128}, rng);
  const lnforge::NoiseSchedule s = lnforge::make_schedule(200, 1e-4, 0.02);
  std::vector<lnforge::DiffusionExample> batch(static_cast<std::size_t>(state.range(0)));
  for (auto& ex : batch)
    for (int i = 0; i < 32; ++i) ex.z0.push_back(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(lnforge::diffusion_loss(net, batch, s, rng));
}
BENCHMARK(BM_DiffusionLossBatch)->Arg(16)->Arg(64);

void BM_ReverseSample(benchmark::State& state) {
  lnforge::Rng rng(2);
  const lnforge::DenoiserNet net = lnforge::make_denoiser(32, 0, {128, 128}, rng);
  const lnforge::NoiseSchedule s = lnforge::make_schedule(200, 1e-4, 0.02);
  for (auto _ : state) benchmark::DoNotOptimize(lnforge::reverse_sample(net, s, rng));
}
BENCHMARK(BM_ReverseSample)->Unit(benchmark::kMillisecond);

}  // namespace
