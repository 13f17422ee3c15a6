#include <benchmark/benchmark.h>

#include <random>

#include "pepkit/cert.hpp"
#include "pepkit/entropic.hpp"
#include "pepkit/pep.hpp"
#include "pepkit/sdpsolve.hpp"

using namespace pepkit;

static void BM_SolveEls(benchmark::State& state) {
  PepInstance inst;
  inst.variant = Variant::GradientNorm;
  inst.mu = 0.25;
  inst.L = 1.0;
  inst.eps = 0.05;
  const GramSdpProblem p = build(inst);
  for (auto _ : state) benchmark::DoNotOptimize(solve(p).objective_value);
}
BENCHMARK(BM_SolveEls);

static void BM_SolveFixed(benchmark::State& state) {
  PepInstance inst;
  inst.variant = Variant::FunctionValue;
  inst.mu = 0.25;
  inst.L = 1.0;
  inst.eps = 0.05;
  inst.step = StepRule::fixed(fixed_gamma_max(0.25, 1.0, 0.05));
  const GramSdpProblem p = build(inst);
  for (auto _ : state) benchmark::DoNotOptimize(solve(p).objective_value);
}
BENCHMARK(BM_SolveFixed);

static void BM_CertificateIdentity(benchmark::State& state) {
  const Certificate c = els_distance_certificate(0.25, 0.3);
  std::mt19937_64 rng(1);
  const GramPoint pt = random_gram_point(rng);
  for (auto _ : state) benchmark::DoNotOptimize(verify_identity(c, pt));
}
BENCHMARK(BM_CertificateIdentity);

static void BM_HitAndRun(benchmark::State& state) {
  const BoltzmannModel m{Box{{0.0, 0.0}, {1.0, 1.0}}, {1.0, 0.5}};
  const auto count = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(hit_and_run(m, Vector{0.5, 0.5}, count, seed++).size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_HitAndRun)->Arg(1024)->Arg(8192);

static void BM_IpmExact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  IpmConfig cfg;
  cfg.box = Box{Vector(n, 0.0), Vector(n, 1.0)};
  cfg.theta_hat = Vector(n, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(ipm_run(cfg).steps());
}
BENCHMARK(BM_IpmExact)->Arg(2)->Arg(5);
BENCHMARK_MAIN();
