#include <benchmark/benchmark.h>

#include <algorithm>

#include "probest/metrics.hpp"
#include "probest/rng.hpp"

namespace {

probest::PredictionSet random_set(std::size_t n) {
  probest::Rng rng(1);
  probest::PredictionSet s;
  s.probs.resize(n);
  s.outcomes.resize(n);
  std::vector<double> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = rng.uniform();
    s.probs[i] = std::clamp(truth[i] + 0.05 * rng.normal(), 0.0, 1.0);
    s.outcomes[i] = rng.bernoulli(truth[i]) ? 1 : 0;
  }
  s.truth = std::move(truth);
  return s;
}

void BM_Evaluate(benchmark::State& state) {
  const auto s = random_set(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(probest::evaluate(s, 15));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Evaluate)->RangeMultiplier(10)->Range(1000, 1000000)->Complexity();

void BM_KsError(benchmark::State& state) {
  const auto s = random_set(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(probest::ks_error(s));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KsError)->RangeMultiplier(10)->Range(1000, 1000000)->Complexity();

void BM_Auc(benchmark::State& state) {
  const auto s = random_set(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(probest::auc(s));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auc)->RangeMultiplier(10)->Range(1000, 1000000)->Complexity();

}  // namespace
