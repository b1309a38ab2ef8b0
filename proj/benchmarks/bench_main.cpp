#include <benchmark/benchmark.h>

#include <vector>

#include "adacat/armodel.hpp"
#include "adacat/datasets.hpp"
#include "adacat/smoothing.hpp"

using namespace adacat;

namespace {

LogitVector random_logits(std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  LogitVector l;
  for (std::size_t i = 0; i < k; ++i) {
    l.phi.push_back(rng.normal());
    l.psi.push_back(rng.normal());
  }
  return l;
}

void BM_SmoothedGrad(benchmark::State& state, KernelKind kind) {
  const auto l = random_logits(static_cast<std::size_t>(state.range(0)), 1);
  const SmoothingKernel kernel(kind, 1e-3);
  Rng rng(2);
  std::vector<double> xs(1024);
  for (auto& x : xs) x = rng.uniform();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(smoothed_loglik_grad(l, kernel, xs[i++ & 1023]));
}
BENCHMARK_CAPTURE(BM_SmoothedGrad, uniform, KernelKind::uniform)->RangeMultiplier(4)->Range(4, 256);
BENCHMARK_CAPTURE(BM_SmoothedGrad, gaussian, KernelKind::truncated_gaussian)->RangeMultiplier(4)->Range(4, 256);

void BM_LogPdf(benchmark::State& state) {
  const auto p = params_from_logits(random_logits(static_cast<std::size_t>(state.range(0)), 3));
  Rng rng(4);
  std::vector<double> xs(1024);
  for (auto& x : xs) x = rng.uniform();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(p.log_pdf(xs[i++ & 1023]));
}
BENCHMARK(BM_LogPdf)->RangeMultiplier(4)->Range(4, 256);

void BM_JointObjective(benchmark::State& state) {
  const auto data = synth_two_spirals(256, 0.3, 5);
  ModelConfig mc;
  mc.dims = 2;
  mc.bins = 16;
  mc.hidden = {64, 64};
  ArDensityModel m(mc, 6);
  const SmoothingKernel kernel(KernelKind::uniform, 1e-3);
  for (auto _ : state)
    benchmark::DoNotOptimize(smoothed_joint_objective(m, data.samples, kernel, static_cast<std::size_t>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_JointObjective)->Arg(1)->Arg(4)->UseRealTime();

}  // namespace
BENCHMARK_MAIN();
