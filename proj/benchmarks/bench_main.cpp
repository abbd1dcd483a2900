// Microbenchmarks of the per-slot and per-block kernels on the desk scenario.
// The fixture state is built outside the timed loop; every benchmark uses a
// fixed seed so runs are comparable.

#include <benchmark/benchmark.h>

#include "irsfd/channels.hpp"
#include "irsfd/overhead.hpp"
#include "irsfd/ssca.hpp"
#include "irsfd/system.hpp"
#include "irsfd/unfolding.hpp"
#include "irsfd/wmmse.hpp"

using namespace irsfd;

namespace {

struct Instance {
  ScenarioConfig cfg;
  FullCsi csi;
  PhaseVector theta;
  EffectiveCsi eff;
  BeamformerSet init;
};

Instance make_instance(int irs_elements, std::uint64_t seed) {
  Instance in;
  in.cfg = desk_scenario();
  in.cfg.irs_elements = irs_elements;
  Rng rng(seed);
  in.csi = sample_full_csi(in.cfg, rng);
  in.theta = random_phases(irs_elements, rng);
  in.eff = effective_channels(in.csi, in.theta);
  in.init = random_feasible_init(in.cfg, rng);
  return in;
}

void BM_ChannelSample(benchmark::State& state) {
  ScenarioConfig cfg = desk_scenario();
  cfg.irs_elements = static_cast<int>(state.range(0));
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(sample_full_csi(cfg, rng));
}
BENCHMARK(BM_ChannelSample)->Arg(16)->Arg(64)->Arg(200);

void BM_EffectiveChannels(benchmark::State& state) {
  const Instance in = make_instance(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(effective_channels(in.csi, in.theta));
}
BENCHMARK(BM_EffectiveChannels)->Arg(16)->Arg(64)->Arg(200);

void BM_WeightedSumRate(benchmark::State& state) {
  const Instance in = make_instance(16, 3);
  for (auto _ : state) benchmark::DoNotOptimize(weighted_sum_rate(in.eff, in.init, in.cfg));
}
BENCHMARK(BM_WeightedSumRate);

// Fixed iteration count so the figure is the cost per BCD sweep times range(0).
void BM_BcdIterations(benchmark::State& state) {
  const Instance in = make_instance(16, 4);
  BcdConfig bcd;
  bcd.max_iterations = static_cast<int>(state.range(0));
  bcd.tolerance = 1e-300;
  for (auto _ : state) benchmark::DoNotOptimize(run_bcd(in.eff, in.init, in.cfg, bcd));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BcdIterations)->Arg(1)->Arg(10)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_SampleGradient(benchmark::State& state) {
  const Instance in = make_instance(static_cast<int>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(sample_gradient(in.theta, in.csi, in.cfg, in.init));
}
BENCHMARK(BM_SampleGradient)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_RateGradientTheta(benchmark::State& state) {
  const Instance in = make_instance(static_cast<int>(state.range(0)), 6);
  for (auto _ : state) benchmark::DoNotOptimize(rate_gradient_theta(in.theta, in.init, in.csi, in.cfg));
}
BENCHMARK(BM_RateGradientTheta)->Arg(16)->Arg(64)->Arg(200);

void BM_NetworkForward(benchmark::State& state) {
  const Instance in = make_instance(16, 7);
  Rng rng(8);
  const auto [lpbn, sabn] = init_params(in.cfg, static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(network_forward(in.csi, lpbn, sabn, in.cfg));
}
BENCHMARK(BM_NetworkForward)->Arg(2)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_NetworkBackward(benchmark::State& state) {
  const Instance in = make_instance(16, 9);
  Rng rng(10);
  const auto [lpbn, sabn] = init_params(in.cfg, 8, rng);
  const std::vector<FullCsi> batch(static_cast<std::size_t>(state.range(0)), in.csi);
  for (auto _ : state) benchmark::DoNotOptimize(backward(lpbn, sabn, batch, in.cfg, ThetaGradient::Full));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NetworkBackward)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_CsiOverhead(benchmark::State& state) {
  OverheadParams p;
  p.t = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(csi_overhead(p));
}
BENCHMARK(BM_CsiOverhead)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
