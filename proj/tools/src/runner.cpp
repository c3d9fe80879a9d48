#include "probest_tools/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "probest/error.hpp"
#include "probest/recal.hpp"
#include "probest/rng.hpp"
#include "probest/synthgen.hpp"
#include "probest_tools/svg.hpp"

namespace probest::tools {
namespace {

bool uses_warm_model(Method m) {
  switch (m) {
    case Method::CeEarlyStop:
    case Method::Platt:
    case Method::Temperature:
    case Method::CapeBin:
    case Method::CapeKernel:
      return true;
    default:
      return false;
  }
}

PredictionSet with_probs(const PredictionSet& base, std::vector<double> probs) {
  PredictionSet out = base;
  out.probs = std::move(probs);
  return out;
}

struct Context {
  const ExperimentConfig& config;
  LabeledDataset data;
  Split parts;
  TrainConfig train;
  std::optional<ModelParams> warm;
};

PredictionSet run_method(Method method, const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto& data = ctx.data;
  const auto& parts = ctx.parts;
  switch (method) {
    case Method::CeEarlyStop:
      return predict_set(*ctx.warm, data, parts.test);
    case Method::CeResampled: {
      TrainConfig t = ctx.train;
      t.resample = true;
      t.seed = derive_seed(cfg.seed, "method/ce_resampled");
      return predict_set(train(data, parts, t).params, data, parts.test);
    }
    case Method::Platt: {
      const auto val = predict_set(*ctx.warm, data, parts.val);
      const auto test = predict_set(*ctx.warm, data, parts.test);
      const auto params = platt_fit(val.probs, val.outcomes);
      return with_probs(test, platt_apply(params, test.probs));
    }
    case Method::Temperature: {
      const auto val = predict_set(*ctx.warm, data, parts.val);
      const auto test = predict_set(*ctx.warm, data, parts.test);
      const auto params = temperature_fit(val.probs, val.outcomes);
      return with_probs(test, temperature_apply(params, test.probs));
    }
    case Method::Focal: {
      TrainConfig t = ctx.train;
      t.loss = {LossKind::Focal, cfg.focal_beta};
      t.seed = derive_seed(cfg.seed, "method/focal");
      return predict_set(train(data, parts, t).params, data, parts.test);
    }
    case Method::Entropy: {
      TrainConfig t = ctx.train;
      t.loss = {LossKind::EntropyPenalty, cfg.entropy_beta};
      t.seed = derive_seed(cfg.seed, "method/entropy");
      return predict_set(train(data, parts, t).params, data, parts.test);
    }
    case Method::DeepEnsemble: {
      TrainConfig t = ctx.train;
      t.seed = derive_seed(cfg.seed, "method/ensemble");
      const auto members = train_ensemble(data, parts, t, cfg.ensemble_members);
      return predict_set(std::span<const ModelParams>(members), data, parts.test);
    }
    case Method::CapeBin:
    case Method::CapeKernel: {
      CapeConfig c = cfg.cape;
      c.seed = derive_seed(cfg.seed, "method/cape");
      c.clamp_eps = ctx.train.clamp_eps;
      if (method == Method::CapeBin) {
        if (!std::holds_alternative<BinEstimator>(c.estimator)) c.estimator = BinEstimator{};
      } else if (!std::holds_alternative<KernelEstimator>(c.estimator)) {
        c.estimator = KernelEstimator{};
      }
      return predict_set(cape_train(*ctx.warm, data, parts, c).params, data, parts.test);
    }
    case Method::CapeFromScratch: {
      CapeConfig c = cfg.cape;
      c.seed = derive_seed(cfg.seed, "method/cape_from_scratch");
      c.clamp_eps = ctx.train.clamp_eps;
      if (!std::holds_alternative<BinEstimator>(c.estimator)) c.estimator = BinEstimator{};
      return predict_set(cape_from_scratch(ctx.train.arch, data, parts, c).params, data,
                         parts.test);
    }
  }
  throw InvalidArgument("unhandled method");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

template <class Fn>
void parallel_for(std::size_t jobs, std::size_t threads, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      try {
        fn(j);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, jobs));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  // Report the first failure in job order so the message is deterministic.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose) {
  return Rng::stream(master, purpose).next();
}

LabeledDataset make_dataset(const DataConfig& config, std::uint64_t seed) {
  if (config.kind == DataConfig::Kind::Scenario) {
    return generate_scenario_dataset(config.scenario, config.n, config.dim, config.noise_sd, seed);
  }
  return generate_logistic_dataset(LogisticModelSpec::aligned(config.dim, config.gamma), config.n,
                                   seed);
}

std::vector<std::optional<Interval>> bootstrap_intervals(const PredictionSet& pred,
                                                         std::size_t bins,
                                                         std::size_t replicates,
                                                         std::uint64_t seed) {
  std::vector<std::vector<double>> samples(kNumMetricColumns);
  Rng rng = Rng::stream(seed, "bootstrap");
  const std::size_t n = pred.size();
  PredictionSet draw;
  draw.probs.resize(n);
  draw.outcomes.resize(n);
  if (pred.truth) draw.truth.emplace(n);
  for (std::size_t b = 0; b < replicates; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(rng.below(n));
      draw.probs[i] = pred.probs[k];
      draw.outcomes[i] = pred.outcomes[k];
      if (pred.truth) (*draw.truth)[i] = (*pred.truth)[k];
    }
    const auto values = metric_values(evaluate(draw, bins));
    for (std::size_t m = 0; m < kNumMetricColumns; ++m) {
      if (values[m]) samples[m].push_back(*values[m]);
    }
  }
  // Linear interpolation between order statistics.
  auto quantile = [](const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  };
  std::vector<std::optional<Interval>> out(kNumMetricColumns);
  for (std::size_t m = 0; m < kNumMetricColumns; ++m) {
    auto& s = samples[m];
    if (s.empty()) continue;
    std::sort(s.begin(), s.end());
    out[m] = Interval{quantile(s, 0.025), quantile(s, 0.975)};
  }
  return out;
}

ExperimentResult run_methods(const ExperimentConfig& config,
                             const std::optional<LabeledDataset>& dataset) {
  config.validate();
  Context ctx{config,
              dataset ? *dataset : make_dataset(config.data, derive_seed(config.seed, "data")),
              {},
              config.train,
              std::nullopt};
  if (ctx.data.dim() != config.data.dim) {
    throw ConfigError("data.dim is " + std::to_string(config.data.dim) + " but the dataset has " +
                      std::to_string(ctx.data.dim()) + " features");
  }
  if (!ctx.data.has_truth() &&
      std::find(config.methods.begin(), config.methods.end(), Method::CeResampled) !=
          config.methods.end()) {
    throw ConfigError("ce_resampled needs ground-truth probabilities in the dataset");
  }
  ctx.parts = split(ctx.data, config.data.split, derive_seed(config.seed, "split"));
  ctx.train.arch = config.architecture();
  ctx.train.seed = derive_seed(config.seed, "method/ce");

  const bool need_warm = std::any_of(config.methods.begin(), config.methods.end(), uses_warm_model);
  if (need_warm) {
    try {
      ctx.warm = train(ctx.data, ctx.parts, ctx.train).params;
    } catch (const std::exception& e) {
      throw MethodFailure(Method::CeEarlyStop, e.what());
    }
  }

  ExperimentResult result;
  result.seed = config.seed;
  result.methods.resize(config.methods.size());
  parallel_for(config.methods.size(), config.threads, [&](std::size_t j) {
    const Method method = config.methods[j];
    MethodResult r{method, {}, {}, {}, {}};
    try {
      r.test = run_method(method, ctx);
      const std::size_t bins = std::min(config.bins, r.test.size());
      r.report = evaluate(r.test, bins);
      r.curve = reliability_curve(r.test, bins);
      if (config.bootstrap > 0) {
        // Same resamples for every method: the seed does not depend on j.
        r.intervals = bootstrap_intervals(r.test, bins, config.bootstrap,
                                          derive_seed(config.seed, "bootstrap"));
      }
    } catch (const MethodFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw MethodFailure(method, e.what());
    }
    result.methods[j] = std::move(r);
  });
  return result;
}

std::filesystem::path make_run_dir(const std::filesystem::path& base, std::uint64_t seed) {
  std::filesystem::create_directories(base);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &utc);
  const std::string stem = std::string("run-") + stamp + "-s" + std::to_string(seed);
  for (std::size_t k = 0;; ++k) {
    auto dir = base / (k == 0 ? stem : stem + "-" + std::to_string(k));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

void write_metrics_csv(const ExperimentResult& result, const std::filesystem::path& path) {
  const bool with_ci = std::any_of(result.methods.begin(), result.methods.end(),
                                   [](const MethodResult& r) { return !r.intervals.empty(); });
  auto out = open_out(path);
  out << "method,seed," << metric_csv_header();
  if (with_ci) {
    for (const char* name : kMetricColumns) out << ',' << name << "_lo," << name << "_hi";
  }
  out << '\n';
  for (const auto& r : result.methods) {
    out << to_string(r.method) << ',' << result.seed << ',' << metric_csv_row(r.report);
    if (with_ci) {
      for (std::size_t m = 0; m < kNumMetricColumns; ++m) {
        const bool has = m < r.intervals.size() && r.intervals[m].has_value();
        out << ',';
        if (has) out << format_double(r.intervals[m]->lo);
        out << ',';
        if (has) out << format_double(r.intervals[m]->hi);
      }
    }
    out << '\n';
  }
}

void write_reliability_csv(const ReliabilityCurve& curve, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "bin,q_mean,p_emp,count\n";
  for (std::size_t b = 0; b < curve.bins.size(); ++b) {
    const auto& bin = curve.bins[b];
    out << b << ',' << format_double(bin.q_mean) << ',' << format_double(bin.p_emp) << ','
        << bin.count << '\n';
  }
}

void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  write_metrics_csv(result, dir / "metrics.csv");
  for (const auto& r : result.methods) {
    const std::string name = to_string(r.method);
    write_reliability_csv(r.curve, dir / ("reliability_" + name + ".csv"));
    render_reliability_svg(r.curve, dir / ("reliability_" + name + ".svg"), name);
  }
}

std::filesystem::path run_experiment(const ExperimentConfig& config,
                                     const std::optional<LabeledDataset>& dataset) {
  const auto result = run_methods(config, dataset);
  const auto dir = make_run_dir(config.output, config.seed);
  write_experiment_outputs(result, dir);
  return dir;
}

MetricComparison compare_metrics(const ExperimentResult& result) {
  std::vector<double> msep;
  for (const auto& r : result.methods) {
    if (!r.report.mse_p) throw InvalidState("metric comparison needs ground-truth probabilities");
    msep.push_back(*r.report.mse_p);
  }
  MetricComparison out;
  for (std::size_t m = 0; m < kNumMetricColumns; ++m) {
    if (std::string(kMetricColumns[m]) == "mse_p") continue;
    std::vector<double> xs, ys;
    for (std::size_t j = 0; j < result.methods.size(); ++j) {
      const auto v = metric_values(result.methods[j].report)[m];
      if (!v) continue;
      xs.push_back(*v);
      ys.push_back(msep[j]);
    }
    out.correlations.push_back({kMetricColumns[m], pearson(xs, ys)});
  }
  return out;
}

void write_metric_comparison_csv(const ExperimentResult& result,
                                 const MetricComparison& comparison,
                                 const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "method,seed,metric,value,mse_p\n";
  for (const auto& r : result.methods) {
    const auto values = metric_values(r.report);
    for (std::size_t m = 0; m < kNumMetricColumns; ++m) {
      if (std::string(kMetricColumns[m]) == "mse_p") continue;
      out << to_string(r.method) << ',' << result.seed << ',' << kMetricColumns[m] << ',';
      if (values[m]) out << format_double(*values[m]);
      out << ',' << format_double(*r.report.mse_p) << '\n';
    }
  }
  for (const auto& c : comparison.correlations) {
    out << "pearson," << result.seed << ',' << c.metric << ',';
    if (c.pearson) out << format_double(*c.pearson);
    out << ",\n";
  }
}

std::filesystem::path run_metric_comparison(const ExperimentConfig& config,
                                            const std::optional<LabeledDataset>& dataset) {
  if (dataset && !dataset->has_truth()) {
    throw ConfigError("metric comparison needs ground-truth probabilities in the dataset");
  }
  const auto result = run_methods(config, dataset);
  const auto comparison = compare_metrics(result);
  for (const auto& c : comparison.correlations) {
    if (!c.pearson) {
      std::cerr << "warning: correlation of " << c.metric
                << " with mse_p is undefined (fewer than two distinct points)\n";
    }
  }
  const auto dir = make_run_dir(config.output, config.seed);
  write_metric_comparison_csv(result, comparison, dir / "metric_vs_msep.csv");
  return dir;
}

std::filesystem::path run_earlylearn(const EarlyLearnConfig& config) {
  config.validate();
  std::vector<LineSeries> series;
  auto to_series = [](const Trajectory& t, std::string label) {
    LineSeries s{std::move(label), {}, {}};
    for (const auto& p : t.points) {
      s.x.push_back(static_cast<double>(p.k));
      s.y.push_back(p.mse_p);
    }
    return s;
  };

  TrajectoryConfig fixed = config.trajectory;
  fixed.seed = config.seed;
  fixed.resample = false;
  const Trajectory base = run_trajectory(fixed);
  series.push_back(to_series(base, "fixed labels"));
  std::optional<Trajectory> resampled;
  if (config.with_resampled) {
    TrajectoryConfig r = fixed;
    r.resample = true;
    resampled = run_trajectory(r);
    series.push_back(to_series(*resampled, "resampled labels"));
  }
  std::optional<std::vector<SweepRow>> sweep;
  if (config.sweep) {
    SweepConfig s = *config.sweep;
    s.seed = config.seed;
    sweep = kappa_sweep(s);
  }

  const auto dir = make_run_dir(config.output, config.seed);
  write_trajectory_csv(base, dir / "trajectory.csv");
  if (resampled) write_trajectory_csv(*resampled, dir / "trajectory_resampled.csv");
  render_line_svg(series, dir / "trajectory.svg", "gradient step k", "MSE_p", "MSE_p trajectory");
  if (sweep) write_sweep_csv(*sweep, dir / "sweep.csv");
  return dir;
}

}  // namespace probest::tools
