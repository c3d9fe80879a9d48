#include "probest/cape.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "probest/error.hpp"
#include "probest/metrics.hpp"

namespace probest {
namespace {

void check_aligned(std::span<const double> preds, std::span<const int> outcomes) {
  if (preds.size() != outcomes.size()) {
    throw InvalidArgument("predictions and outcomes differ in length");
  }
}

}  // namespace

EmpProbs bin_emp_probs(std::span<const double> preds, std::span<const int> outcomes,
                       std::size_t num_bins) {
  check_aligned(preds, outcomes);
  const auto bin = quantile_bins(preds, num_bins);
  std::vector<double> sum(num_bins, 0.0);
  std::vector<std::size_t> count(num_bins, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum[bin[i]] += outcomes[i];
    ++count[bin[i]];
  }
  EmpProbs out;
  out.values.resize(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out.values[i] = sum[bin[i]] / static_cast<double>(count[bin[i]]);
  }
  return out;
}

EmpProbs kernel_emp_probs(std::span<const double> preds, std::span<const int> outcomes,
                          std::size_t neighbors, double sigma) {
  check_aligned(preds, outcomes);
  const std::size_t n = preds.size();
  if (neighbors < 1 || neighbors > n) {
    throw InvalidArgument("neighbor count must lie in [1, N]; got " +
                          std::to_string(neighbors) + " for N=" + std::to_string(n));
  }
  if (!(sigma > 0.0)) throw InvalidArgument("kernel bandwidth must be positive");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a] < preds[b]; });

  const double inv_s2 = 1.0 / (sigma * sigma);
  EmpProbs out;
  out.values.resize(n);
  std::vector<std::size_t> group;

  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t i = order[pos];
    const double pi = preds[i];
    double num = outcomes[i];  // self, weight exp(0) = 1
    double den = 1.0;
    auto take = [&](std::size_t j) {
      const double diff = pi - preds[j];
      const double w = std::exp(-diff * diff * inv_s2);
      num += w * outcomes[j];
      den += w;
    };

    // Walk outward in sorted order. `left` and `right` are one past the
    // window edges; each step consumes every candidate at the current
    // smallest distance, or the lowest-index subset of them when fewer slots
    // remain.
    std::size_t remaining = neighbors - 1;
    std::size_t left = pos;        // next left candidate is order[left - 1]
    std::size_t right = pos + 1;   // next right candidate is order[right]
    while (remaining > 0) {
      const double inf = std::numeric_limits<double>::infinity();
      const double dl = left > 0 ? pi - preds[order[left - 1]] : inf;
      const double dr = right < n ? preds[order[right]] - pi : inf;
      const double d = std::min(dl, dr);
      std::size_t new_left = left;
      std::size_t new_right = right;
      while (new_left > 0 && pi - preds[order[new_left - 1]] == d) --new_left;
      while (new_right < n && preds[order[new_right]] - pi == d) ++new_right;
      const std::size_t found = (left - new_left) + (new_right - right);
      if (found <= remaining) {
        for (std::size_t k = new_left; k < left; ++k) take(order[k]);
        for (std::size_t k = right; k < new_right; ++k) take(order[k]);
        remaining -= found;
        left = new_left;
        right = new_right;
      } else {
        group.clear();
        for (std::size_t k = new_left; k < left; ++k) group.push_back(order[k]);
        for (std::size_t k = right; k < new_right; ++k) group.push_back(order[k]);
        std::partial_sort(group.begin(), group.begin() + static_cast<std::ptrdiff_t>(remaining),
                          group.end());
        for (std::size_t k = 0; k < remaining; ++k) take(group[k]);
        remaining = 0;
      }
    }
    out.values[i] = num / den;
  }
  return out;
}

LossGrad calibration_loss_grad(const ModelParams& params, const BatchView& batch,
                               double clamp_eps) {
  for (double t : batch.targets) {
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("empirical probabilities must lie in [0,1]");
  }
  return ce_loss_grad(params, batch, clamp_eps);
}

void CapeConfig::validate() const {
  if (m < 1) throw InvalidArgument("CaPE frequency m must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must lie in [0,1]");
  if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (!(clamp_eps > 0.0 && clamp_eps <= 0.1)) throw InvalidArgument("clamp_eps must lie in (0, 0.1]");
  if (const auto* b = std::get_if<BinEstimator>(&estimator); b && b->bins < 1) {
    throw InvalidArgument("bin estimator needs at least one bin");
  }
  if (const auto* k = std::get_if<KernelEstimator>(&estimator); k && !(k->sigma > 0.0)) {
    throw InvalidArgument("kernel bandwidth must be positive");
  }
}

EmpProbs estimate_emp_probs(const ModelParams& params, const LabeledDataset& dataset,
                            std::span<const std::size_t> train_rows,
                            const EmpEstimator& estimator) {
  const std::vector<double> preds = predict(params, dataset.features(), train_rows);
  std::vector<int> outcomes;
  outcomes.reserve(train_rows.size());
  for (std::size_t r : train_rows) outcomes.push_back(dataset.outcomes()[r]);

  EmpProbs local;
  if (const auto* b = std::get_if<BinEstimator>(&estimator)) {
    local = bin_emp_probs(preds, outcomes, b->bins);
  } else {
    const auto& k = std::get<KernelEstimator>(estimator);
    std::size_t r = k.neighbors;
    if (r == 0) {
      r = std::max<std::size_t>(
          10, static_cast<std::size_t>(std::llround(static_cast<double>(preds.size()) / 10.0)));
      r = std::min(r, preds.size());
    }
    local = kernel_emp_probs(preds, outcomes, r, k.sigma);
  }
  EmpProbs by_row;
  by_row.values.assign(dataset.size(), 0.0);
  for (std::size_t k = 0; k < train_rows.size(); ++k) by_row.values[train_rows[k]] = local.values[k];
  return by_row;
}

namespace {

CapeResult run_cape(ModelParams params, const LabeledDataset& dataset, const Split& split,
                    const CapeConfig& config, const EpochObserver& observer) {
  config.validate();
  if (split.train.empty() || split.val.empty()) {
    throw InvalidArgument("CaPE needs non-empty train and validation parts");
  }
  if (params.arch().input_dim != dataset.dim()) {
    throw InvalidArgument("model input dimension does not match dataset");
  }

  const std::vector<double> observed(dataset.outcomes().begin(), dataset.outcomes().end());
  std::vector<double> targets(dataset.size(), 0.0);
  EmpProbs emp;
  const LossSpec ce{LossKind::CrossEntropy, 0.0};

  CapeResult result{params, {}};
  double best_brier = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    CapePhase phase;
    bool refresh = false;
    std::span<const double> epoch_targets;
    if (config.mode == CapeMode::Alternating) {
      if (epoch % config.m == 0) {
        phase = CapePhase::Calibration;
        refresh = true;
        emp = estimate_emp_probs(params, dataset, split.train, config.estimator);
        epoch_targets = emp.values;
      } else {
        phase = CapePhase::Discrimination;
        epoch_targets = observed;
      }
    } else {
      // Cross-entropy is linear in its target, so the weighted objective is
      // a single cross-entropy against the blended target.
      phase = CapePhase::Weighted;
      refresh = (epoch - 1) % config.m == 0;
      if (refresh) emp = estimate_emp_probs(params, dataset, split.train, config.estimator);
      for (std::size_t r : split.train) {
        targets[r] = (1.0 - config.lambda) * observed[r] + config.lambda * emp.values[r];
      }
      epoch_targets = targets;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = sgd_epoch(params, dataset.features(), split.train, epoch_targets, ce,
                               config.lr, config.batch_size, config.clamp_eps, config.seed,
                               epoch);
    const auto v = validation_stats(params, dataset, split.val, config.clamp_eps,
                                    config.ece_bins);
    rec.val_loss = v.ce;
    rec.val_ece = v.ece;
    rec.val_brier = v.brier;
    rec.mse_p = v.mse_p;
    result.history.history.records.push_back(rec);
    result.history.phases.push_back(phase);
    result.history.emp_refreshed.push_back(refresh);
    if (observer) observer(epoch, params);

    if (rec.val_brier < best_brier) {
      best_brier = rec.val_brier;
      result.params = params;
      result.history.history.best_epoch = epoch;
    }
  }
  return result;
}

const char* phase_name(CapePhase p) {
  switch (p) {
    case CapePhase::Discrimination: return "discrimination";
    case CapePhase::Calibration: return "calibration";
    case CapePhase::Weighted: return "weighted";
  }
  return "unknown";
}

}  // namespace

CapeResult cape_train(ModelParams warm_model, const LabeledDataset& dataset, const Split& split,
                      const CapeConfig& config, const EpochObserver& observer) {
  return run_cape(std::move(warm_model), dataset, split, config, observer);
}

CapeResult cape_from_scratch(const Architecture& arch, const LabeledDataset& dataset,
                             const Split& split, const CapeConfig& config,
                             const EpochObserver& observer) {
  return run_cape(initialize(arch, config.seed), dataset, split, config, observer);
}

void write_cape_history_csv(const CapeHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  const auto& recs = history.history.records;
  const bool with_msep = std::any_of(recs.begin(), recs.end(),
                                     [](const EpochRecord& r) { return r.mse_p.has_value(); });
  out << "epoch,train_loss,val_loss,val_ece,val_brier" << (with_msep ? ",mse_p" : "")
      << ",loss_kind_this_epoch,emp_refresh\n";
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const auto& r = recs[k];
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss)
        << ',' << format_double(r.val_ece) << ',' << format_double(r.val_brier);
    if (with_msep) {
      out << ',';
      if (r.mse_p) out << format_double(*r.mse_p);
    }
    out << ',' << phase_name(history.phases[k]) << ',' << (history.emp_refreshed[k] ? 1 : 0)
        << '\n';
  }
}

}  // namespace probest
