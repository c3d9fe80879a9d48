#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probest/data.hpp"

namespace probest {

inline constexpr std::size_t kDefaultReportBins = 15;

/// Equal-count bin index for every example.
///
/// Examples are ordered by (prob, original index); bin b receives sorted
/// positions [floor(b*N/B), floor((b+1)*N/B)). Throws InvalidArgument when
/// B == 0 or N < B.
std::vector<std::size_t> quantile_bins(std::span<const double> probs, std::size_t num_bins);

struct ReliabilityBin {
  double q_mean = 0.0;  ///< mean predicted probability in the bin
  double p_emp = 0.0;   ///< mean observed outcome in the bin
  std::size_t count = 0;
};

struct ReliabilityCurve {
  std::vector<ReliabilityBin> bins;
  std::size_t num_bins() const noexcept { return bins.size(); }
};

ReliabilityCurve reliability_curve(const PredictionSet& pred, std::size_t num_bins);

/// Unweighted mean of per-bin |p_emp - q_mean| over quantile bins.
double ece(const PredictionSet& pred, std::size_t num_bins);
/// Maximum per-bin |p_emp - q_mean| over quantile bins.
double mce(const PredictionSet& pred, std::size_t num_bins);

/// Binning-free KS calibration error: max over thresholds s of
/// |(1/N) sum 1(y=1, p<=s) - (1/N) sum p 1(p<=s)|.
double ks_error(const PredictionSet& pred);

double brier(const PredictionSet& pred);

struct BrierDecomposition {
  double calibration = 0.0;
  double refinement = 0.0;
};

/// Groups examples by exactly equal predicted value.
BrierDecomposition brier_decomposition(const PredictionSet& pred);

/// Mean negative log-likelihood with probabilities clamped to [1e-12, 1-1e-12].
double nll(const PredictionSet& pred);

/// Mann-Whitney AUC with half credit for ties. Throws UndefinedMetric when
/// only one class is present.
double auc(const PredictionSet& pred);

double mse_p(std::span<const double> predicted, std::span<const double> truth);
/// Mean KL(p_hat || p) of Bernoulli distributions, both clamped to
/// [1e-12, 1-1e-12].
double kl_p(std::span<const double> predicted, std::span<const double> truth);

struct MetricReport {
  double ece = 0.0;
  double mce = 0.0;
  double ks = 0.0;
  double brier = 0.0;
  double brier_calibration = 0.0;
  double brier_refinement = 0.0;
  double nll = 0.0;
  double auc = 0.0;  ///< NaN when undefined (single-class sample)
  std::optional<double> mse_p;
  std::optional<double> kl_p;
};

/// All metrics for `pred`; mse_p/kl_p are filled when `pred.truth` is set.
/// Uses min(num_bins, N) bins so small samples still get a report.
MetricReport evaluate(const PredictionSet& pred, std::size_t num_bins = kDefaultReportBins);

/// Fixed column order for the CSV export.
inline constexpr const char* kMetricColumns[] = {
    "ece", "mce", "ks", "brier", "brier_cal", "brier_ref", "nll", "auc", "mse_p", "kl_p"};
inline constexpr std::size_t kNumMetricColumns = 10;

/// Values in kMetricColumns order; absent values are nullopt.
std::vector<std::optional<double>> metric_values(const MetricReport& report);
/// `ece,mce,...,kl_p`
std::string metric_csv_header();
/// One CSV row; empty cells for absent or undefined values.
std::string metric_csv_row(const MetricReport& report);

/// Pearson correlation; nullopt when fewer than two points or a constant series.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

}  // namespace probest
