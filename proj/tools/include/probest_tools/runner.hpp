#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probest/data.hpp"
#include "probest/metrics.hpp"
#include "probest_tools/config.hpp"

namespace probest::tools {

/// Raised when one method of an experiment fails; carries the method name.
class MethodFailure : public std::runtime_error {
 public:
  MethodFailure(Method method, const std::string& what)
      : std::runtime_error(to_string(method) + ": " + what), method_(method) {}
  Method method() const noexcept { return method_; }

 private:
  Method method_;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct MethodResult {
  Method method;
  PredictionSet test;
  MetricReport report;
  ReliabilityCurve curve;
  /// Percentile intervals in kMetricColumns order; empty without bootstrap,
  /// nullopt where the metric is undefined in every replicate.
  std::vector<std::optional<Interval>> intervals;
};

struct ExperimentResult {
  std::uint64_t seed = 0;
  std::vector<MethodResult> methods;  ///< config order
};

/// Seed for one purpose, derived from the master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose);

LabeledDataset make_dataset(const DataConfig& config, std::uint64_t seed);

/// Runs every configured method in memory (no files written). With
/// `dataset` set, it replaces the generated data; methods that need truth
/// probabilities then raise ConfigError if the file carries none.
ExperimentResult run_methods(const ExperimentConfig& config,
                             const std::optional<LabeledDataset>& dataset = std::nullopt);

/// Percentile 95% intervals over `replicates` resamples of the prediction set.
std::vector<std::optional<Interval>> bootstrap_intervals(const PredictionSet& pred,
                                                         std::size_t bins,
                                                         std::size_t replicates,
                                                         std::uint64_t seed);

/// Fresh directory `<base>/run-<UTC timestamp>-s<seed>[-k]`.
std::filesystem::path make_run_dir(const std::filesystem::path& base, std::uint64_t seed);

/// metrics.csv plus reliability_<method>.csv/.svg for every method.
void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir);
void write_metrics_csv(const ExperimentResult& result, const std::filesystem::path& path);
void write_reliability_csv(const ReliabilityCurve& curve, const std::filesystem::path& path);

/// run_methods + outputs in a new timestamped run directory, which is returned.
std::filesystem::path run_experiment(const ExperimentConfig& config,
                                     const std::optional<LabeledDataset>& dataset = std::nullopt);

struct MetricCorrelation {
  std::string metric;
  std::optional<double> pearson;  ///< against MSE_p, across methods
};

struct MetricComparison {
  std::vector<MetricCorrelation> correlations;  ///< kMetricColumns order, mse_p excluded
};

/// Pearson correlation of every metric with MSE_p across the methods of one
/// experiment. Needs truth on the test predictions.
MetricComparison compare_metrics(const ExperimentResult& result);

/// `method,seed,metric,value,mse_p` rows followed by `pearson` rows whose
/// value column holds the correlation (empty when undefined).
void write_metric_comparison_csv(const ExperimentResult& result,
                                 const MetricComparison& comparison,
                                 const std::filesystem::path& path);

/// Runs the configured methods and writes metric_vs_msep.csv into a new run
/// directory. Warns on stderr when a correlation is undefined.
std::filesystem::path run_metric_comparison(
    const ExperimentConfig& config, const std::optional<LabeledDataset>& dataset = std::nullopt);

/// trajectory.csv (+ trajectory_resampled.csv), trajectory.svg and, when a
/// sweep is configured, sweep.csv. Returns the run directory.
std::filesystem::path run_earlylearn(const EarlyLearnConfig& config);

}  // namespace probest::tools
