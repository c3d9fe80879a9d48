#include <benchmark/benchmark.h>

#include "probest/cape.hpp"
#include "probest/rng.hpp"

namespace {

struct Sample {
  std::vector<double> preds;
  std::vector<int> outcomes;
};

Sample sample(std::size_t n) {
  probest::Rng rng(2);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    s.preds.push_back(rng.uniform());
    s.outcomes.push_back(rng.bernoulli(s.preds.back()) ? 1 : 0);
  }
  return s;
}

void BM_BinEmpProbs(benchmark::State& state) {
  const auto s = sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(probest::bin_emp_probs(s.preds, s.outcomes, 20));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BinEmpProbs)->RangeMultiplier(4)->Range(1 << 10, 1 << 18)->Complexity();

void BM_KernelEmpProbs(benchmark::State& state) {
  const auto s = sample(static_cast<std::size_t>(state.range(0)));
  const auto r = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(probest::kernel_emp_probs(s.preds, s.outcomes, r, 0.05));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KernelEmpProbs)
    ->ArgsProduct({{1 << 10, 1 << 14, 1 << 18}, {10, 100}});

}  // namespace
