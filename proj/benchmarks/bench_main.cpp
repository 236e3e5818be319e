// Microbenchmarks: one RHS evaluation, one training-span solve, and one
// loss gradient per model kind.

#include <map>

#include <benchmark/benchmark.h>

#include "chaosode/bench.hpp"
#include "chaosode/loss.hpp"
#include "chaosode/pipeline.hpp"

namespace {

using namespace chaosode;

struct Fixture {
  ObservationSet data;
  RhsPtr rhs;
  std::vector<double> params;
};

const Fixture& fixture(RhsKind kind) {
  static std::map<RhsKind, Fixture> cache;
  auto it = cache.find(kind);
  if (it == cache.end()) {
    Fixture f;
    f.data = generate_data(35, 0.0, 0);
    ModelConfig mc;
    mc.kind = kind;
    f.rhs = build_rhs(mc, f.data.states);
    f.params = estimate_initial_params(f.data, *f.rhs, InitConfig{}, 0);
    it = cache.emplace(kind, std::move(f)).first;
  }
  return it->second;
}

RhsKind kind_of(const benchmark::State& state) { return static_cast<RhsKind>(state.range(0)); }

void BM_RhsEval(benchmark::State& state) {
  const auto& f = fixture(kind_of(state));
  const auto coeffs = f.rhs->coefficients(f.params);
  std::vector<double> x{2.0, 1.5}, dx(2);
  for (auto _ : state) {
    f.rhs->eval(std::span<const double>(coeffs), std::span<const double>(x), std::span<double>(dx));
    benchmark::DoNotOptimize(dx.data());
  }
}

void BM_Solve(benchmark::State& state) {
  const auto& f = fixture(kind_of(state));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(*f.rhs, f.params, eval_setup(SetupName::ex_it)));
}

void BM_SingleShootingGradient(benchmark::State& state) {
  const auto& f = fixture(kind_of(state));
  const ShootingLoss loss(f.rhs, f.data, LossSpec{});
  for (auto _ : state) benchmark::DoNotOptimize(loss.gradient(f.params));
}

void BM_MultipleShootingGradient(benchmark::State& state) {
  const auto& f = fixture(kind_of(state));
  LossSpec spec;
  spec.mode = ShootingMode::multiple;
  spec.plan = segment_grid(f.data.size(), 8);
  const ShootingLoss loss(f.rhs, f.data, spec);
  for (auto _ : state) benchmark::DoNotOptimize(loss.gradient(f.params));
}

void kinds(benchmark::internal::Benchmark* b) {
  b->ArgName("kind");
  for (RhsKind k : {RhsKind::chaos, RhsKind::kernel, RhsKind::neural}) b->Arg(static_cast<int>(k));
}

BENCHMARK(BM_RhsEval)->Apply(kinds);
BENCHMARK(BM_Solve)->Apply(kinds)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SingleShootingGradient)->Apply(kinds)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MultipleShootingGradient)->Apply(kinds)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
