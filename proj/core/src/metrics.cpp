#include "probest/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "probest/error.hpp"

namespace probest {
namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

void check_nonempty(const PredictionSet& pred) {
  if (pred.size() == 0) throw InvalidArgument("prediction set is empty");
  if (pred.outcomes.size() != pred.size()) {
    throw InvalidArgument("probs and outcomes differ in length");
  }
}

// Indices ordered by (prob, index).
std::vector<std::size_t> sorted_order(std::span<const double> probs) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
  return order;
}

}  // namespace

std::vector<std::size_t> quantile_bins(std::span<const double> probs, std::size_t num_bins) {
  const std::size_t n = probs.size();
  if (num_bins == 0) throw InvalidArgument("number of bins must be >= 1");
  if (n < num_bins) {
    throw InvalidArgument("need at least as many examples (" + std::to_string(n) +
                          ") as bins (" + std::to_string(num_bins) + ")");
  }
  const auto order = sorted_order(probs);
  std::vector<std::size_t> bin(n);
  for (std::size_t b = 0; b < num_bins; ++b) {
    const std::size_t lo = b * n / num_bins;
    const std::size_t hi = (b + 1) * n / num_bins;
    for (std::size_t k = lo; k < hi; ++k) bin[order[k]] = b;
  }
  return bin;
}

ReliabilityCurve reliability_curve(const PredictionSet& pred, std::size_t num_bins) {
  check_nonempty(pred);
  const auto bin = quantile_bins(pred.probs, num_bins);
  std::vector<double> sum_q(num_bins, 0.0);
  std::vector<double> sum_y(num_bins, 0.0);
  std::vector<std::size_t> count(num_bins, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sum_q[bin[i]] += pred.probs[i];
    sum_y[bin[i]] += pred.outcomes[i];
    ++count[bin[i]];
  }
  ReliabilityCurve curve;
  curve.bins.reserve(num_bins);
  for (std::size_t b = 0; b < num_bins; ++b) {
    const auto c = static_cast<double>(count[b]);
    curve.bins.push_back({sum_q[b] / c, sum_y[b] / c, count[b]});
  }
  return curve;
}

double ece(const PredictionSet& pred, std::size_t num_bins) {
  const auto curve = reliability_curve(pred, num_bins);
  double total = 0.0;
  for (const auto& b : curve.bins) total += std::abs(b.p_emp - b.q_mean);
  return total / static_cast<double>(curve.bins.size());
}

double mce(const PredictionSet& pred, std::size_t num_bins) {
  const auto curve = reliability_curve(pred, num_bins);
  double worst = 0.0;
  for (const auto& b : curve.bins) worst = std::max(worst, std::abs(b.p_emp - b.q_mean));
  return worst;
}

double ks_error(const PredictionSet& pred) {
  check_nonempty(pred);
  const auto order = sorted_order(pred.probs);
  const auto n = static_cast<double>(pred.size());
  double phi1 = 0.0;
  double phi2 = 0.0;
  double worst = 0.0;
  // Both cumulative sums are step functions that only move at sample values;
  // evaluate after each group of equal predictions.
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    phi1 += pred.outcomes[i];
    phi2 += pred.probs[i];
    const bool group_end =
        k + 1 == order.size() || pred.probs[order[k + 1]] != pred.probs[i];
    if (group_end) worst = std::max(worst, std::abs(phi1 - phi2) / n);
  }
  return worst;
}

double brier(const PredictionSet& pred) {
  check_nonempty(pred);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.probs[i] - pred.outcomes[i];
    total += d * d;
  }
  return total / static_cast<double>(pred.size());
}

BrierDecomposition brier_decomposition(const PredictionSet& pred) {
  check_nonempty(pred);
  const auto order = sorted_order(pred.probs);
  const auto n = static_cast<double>(pred.size());
  BrierDecomposition out;
  std::size_t start = 0;
  while (start < order.size()) {
    const double q = pred.probs[order[start]];
    std::size_t end = start;
    double positives = 0.0;
    while (end < order.size() && pred.probs[order[end]] == q) {
      positives += pred.outcomes[order[end]];
      ++end;
    }
    const auto nk = static_cast<double>(end - start);
    const double qbar = positives / nk;
    out.calibration += nk * (q - qbar) * (q - qbar);
    out.refinement += nk * qbar * (1.0 - qbar);
    start = end;
  }
  out.calibration /= n;
  out.refinement /= n;
  return out;
}

double nll(const PredictionSet& pred) {
  check_nonempty(pred);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clamp_prob(pred.probs[i]);
    total -= pred.outcomes[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return total / static_cast<double>(pred.size());
}

double auc(const PredictionSet& pred) {
  check_nonempty(pred);
  const auto order = sorted_order(pred.probs);
  double n_pos = 0.0;
  for (int y : pred.outcomes) n_pos += y;
  const double n_neg = static_cast<double>(pred.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw UndefinedMetric("AUC needs both positive and negative outcomes");
  }
  // Sum of mid-ranks of the positives.
  double rank_sum = 0.0;
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start;
    double positives = 0.0;
    while (end < order.size() && pred.probs[order[end]] == pred.probs[order[start]]) {
      positives += pred.outcomes[order[end]];
      ++end;
    }
    const double mid_rank = 0.5 * static_cast<double>(start + 1 + end);
    rank_sum += positives * mid_rank;
    start = end;
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double mse_p(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw InvalidArgument("mse_p: length mismatch");
  if (predicted.empty()) throw InvalidArgument("mse_p: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - truth[i];
    total += d * d;
  }
  return total / static_cast<double>(predicted.size());
}

double kl_p(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw InvalidArgument("kl_p: length mismatch");
  if (predicted.empty()) throw InvalidArgument("kl_p: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double q = clamp_prob(predicted[i]);
    const double p = clamp_prob(truth[i]);
    total += q * std::log(q / p) + (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
  }
  return total / static_cast<double>(predicted.size());
}

MetricReport evaluate(const PredictionSet& pred, std::size_t num_bins) {
  check_nonempty(pred);
  const std::size_t bins = std::min(num_bins, pred.size());
  MetricReport r;
  const auto curve = reliability_curve(pred, bins);
  double total = 0.0;
  for (const auto& b : curve.bins) {
    const double gap = std::abs(b.p_emp - b.q_mean);
    total += gap;
    r.mce = std::max(r.mce, gap);
  }
  r.ece = total / static_cast<double>(curve.bins.size());
  r.ks = ks_error(pred);
  r.brier = brier(pred);
  const auto dec = brier_decomposition(pred);
  r.brier_calibration = dec.calibration;
  r.brier_refinement = dec.refinement;
  r.nll = nll(pred);
  try {
    r.auc = auc(pred);
  } catch (const UndefinedMetric&) {
    r.auc = std::numeric_limits<double>::quiet_NaN();
  }
  if (pred.truth) {
    r.mse_p = mse_p(pred.probs, *pred.truth);
    r.kl_p = kl_p(pred.probs, *pred.truth);
  }
  return r;
}

std::vector<std::optional<double>> metric_values(const MetricReport& r) {
  auto defined = [](double v) -> std::optional<double> {
    if (std::isnan(v)) return std::nullopt;
    return v;
  };
  return {r.ece,   r.mce,
          r.ks,    r.brier,
          r.brier_calibration, r.brier_refinement,
          r.nll,   defined(r.auc),
          r.mse_p, r.kl_p};
}

std::string metric_csv_header() {
  std::string out;
  for (std::size_t i = 0; i < kNumMetricColumns; ++i) {
    if (i) out += ',';
    out += kMetricColumns[i];
  }
  return out;
}

std::string metric_csv_row(const MetricReport& report) {
  std::string out;
  const auto values = metric_values(report);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if (values[i]) out += format_double(*values[i]);
  }
  return out;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("pearson: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace probest
