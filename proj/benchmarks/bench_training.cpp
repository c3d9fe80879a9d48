#include <benchmark/benchmark.h>

#include "probest/earlylearn.hpp"
#include "probest/model.hpp"
#include "probest/synthgen.hpp"

namespace {

void BM_SgdEpochMlp(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const auto data = probest::generate_scenario_dataset(probest::Scenario::Linear, 14000, 16, 0.0, 1);
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const std::vector<double> targets(data.outcomes().begin(), data.outcomes().end());
  auto params = probest::initialize(probest::Architecture::mlp(16, hidden), 3);
  std::size_t epoch = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(probest::sgd_epoch(params, data.features(), rows, targets, {}, 0.05,
                                                64, probest::kDefaultClampEps, 1, ++epoch));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows.size()));
}
BENCHMARK(BM_SgdEpochMlp)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_TrajectorySteps(benchmark::State& state) {
  probest::TrajectoryConfig c;
  c.steps = 200;
  c.eval_every = 100;
  c.holdout = 1000;
  for (auto _ : state) benchmark::DoNotOptimize(probest::run_trajectory(c));
}
BENCHMARK(BM_TrajectorySteps)->Unit(benchmark::kMillisecond);

void BM_SeparabilityLp(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto data =
      probest::generate_logistic_dataset(probest::LogisticModelSpec::aligned(dim, 1.0), 500, 4);
  for (auto _ : state) benchmark::DoNotOptimize(probest::separability_check(data));
}
BENCHMARK(BM_SeparabilityLp)->Arg(25)->Arg(250)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
