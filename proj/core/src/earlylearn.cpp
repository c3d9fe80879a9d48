#include "probest/earlylearn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include <Eigen/Dense>

#include "probest/error.hpp"
#include "probest/model.hpp"
#include "probest/rng.hpp"
#include "probest/synthgen.hpp"
#include "simplex.hpp"

namespace probest {
namespace {

using Vec = Eigen::VectorXd;

double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

Vec sigmoid_of(const Vec& z) {
  Vec p(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) p(i) = sigmoid(z(i));
  return p;
}

double mean_ce(const Vec& logits, std::span<const int> y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = logits(i);
    total += y[static_cast<std::size_t>(i)] == 1 ? softplus(-z) : softplus(z);
  }
  return total / static_cast<double>(logits.size());
}

double collapse_of(const Vec& logits, double tol) {
  const Vec p = sigmoid_of(logits);
  return collapse_fraction(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                           tol);
}

Vec to_vec(std::span<const int> y) {
  Vec v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v(static_cast<Eigen::Index>(i)) = y[i];
  return v;
}

struct GdRun {
  Vec theta;
  Vec train_logits;
};

// Plain full-batch GD with a fixed label vector; used by the sweep.
GdRun gradient_descent(const FeatureMatrix& x, std::span<const int> y, Vec theta, double eta,
                       std::size_t steps) {
  const Vec yv = to_vec(y);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  Vec logits = x * theta;
  for (std::size_t k = 0; k < steps; ++k) {
    const Vec residual = sigmoid_of(logits) - yv;
    theta.noalias() -= (eta * inv_n) * (x.transpose() * residual);
    logits.noalias() = x * theta;
  }
  return {std::move(theta), std::move(logits)};
}

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t w = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(w, jobs));
}

}  // namespace

void TrajectoryConfig::validate() const {
  if (n < 1 || dim < 1 || steps < 1 || eval_every < 1 || holdout < 1) {
    throw InvalidArgument("trajectory counts must be >= 1");
  }
  if (!(eta > 0.0)) throw InvalidArgument("step size must be positive");
  if (!(gamma > 0.0) || !(gamma0 > 0.0)) throw InvalidArgument("gamma and gamma0 must be positive");
  if (!(collapse_tol > 0.0 && collapse_tol < 0.5)) {
    throw InvalidArgument("collapse tolerance must lie in (0, 0.5)");
  }
}

double collapse_fraction(std::span<const double> probs, double tol) {
  if (!(tol > 0.0 && tol < 0.5)) throw InvalidArgument("collapse tolerance must lie in (0, 0.5)");
  if (probs.empty()) throw InvalidArgument("collapse fraction of an empty vector");
  std::size_t hits = 0;
  for (double p : probs) hits += (p <= tol || p >= 1.0 - tol) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

double spectral_norm_sq(const FeatureMatrix& x) {
  if (x.size() == 0) return 0.0;
  // Largest eigenvalue of the smaller Gram matrix.
  Eigen::MatrixXd gram = x.rows() <= x.cols() ? Eigen::MatrixXd(x * x.transpose())
                                              : Eigen::MatrixXd(x.transpose() * x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

bool separability_check(const LabeledDataset& dataset) {
  const auto y = dataset.outcomes();
  const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), 0) != y.end();
  if (!has_pos || !has_neg) return true;

  const FeatureMatrix& x = dataset.features();
  // With at least as many coordinates as points and linearly independent
  // rows, any labelling is interpolated exactly.
  if (x.cols() >= x.rows()) {
    const Eigen::MatrixXd gram = x * x.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double hi = eig.eigenvalues().maxCoeff();
    const double lo = eig.eigenvalues().minCoeff();
    if (hi > 0.0 && lo > 1e-10 * hi) return true;
  }
  Eigen::MatrixXd signed_rows = x;
  for (Eigen::Index i = 0; i < signed_rows.rows(); ++i) {
    if (y[static_cast<std::size_t>(i)] == 0) signed_rows.row(i) *= -1.0;
  }
  return detail::max_box_margin(signed_rows) > 1e-9;
}

Trajectory run_trajectory(const TrajectoryConfig& config) {
  config.validate();
  const auto spec = LogisticModelSpec::aligned(config.dim, config.gamma);
  const LabeledDataset data = generate_logistic_dataset(spec, config.n, config.seed);
  const FeatureMatrix& x = data.features();
  const double n = static_cast<double>(config.n);

  Trajectory out;
  const double norm_sq = spectral_norm_sq(x);
  out.curvature_bound = 2.0 * n / norm_sq;
  out.descent_bound = 8.0 * n / norm_sq;
  if (config.eta >= out.descent_bound) {
    throw InvalidArgument("step size " + format_double(config.eta) +
                          " is not below the descent bound " + format_double(out.descent_bound));
  }
  out.separable = separability_check(data);

  // Held-out points for the MSE_p estimate.
  Rng rng = Rng::stream(config.seed, "trajectory/holdout");
  FeatureMatrix z(static_cast<Eigen::Index>(config.holdout), static_cast<Eigen::Index>(config.dim));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
  }
  const Eigen::Map<const Vec> theta_star(spec.theta_star.data(),
                                         static_cast<Eigen::Index>(config.dim));
  const Vec holdout_truth = sigmoid_of(z * theta_star);

  const auto start = initialize_on_sphere(Architecture::logistic(config.dim), config.gamma0,
                                          config.seed);
  Vec theta = Eigen::Map<const Vec>(start.weights().data(), static_cast<Eigen::Index>(config.dim));

  std::vector<int> labels(data.outcomes().begin(), data.outcomes().end());
  Vec logits = x * theta;
  auto record = [&](std::size_t k) {
    const Vec diff = sigmoid_of(z * theta) - holdout_truth;
    TrajectoryPoint pt;
    pt.k = k;
    pt.mse_p = diff.squaredNorm() / static_cast<double>(config.holdout);
    pt.train_ce = mean_ce(logits, labels);
    pt.collapse_fraction = collapse_of(logits, config.collapse_tol);
    out.points.push_back(pt);
  };

  record(0);
  const double scale = config.eta / n;
  for (std::size_t k = 1; k <= config.steps; ++k) {
    if (config.resample) labels = resample_outcomes(data, k, config.seed);
    const Vec residual = sigmoid_of(logits) - to_vec(labels);
    theta.noalias() -= scale * (x.transpose() * residual);
    logits.noalias() = x * theta;
    if (!theta.allFinite()) throw TrainingDiverged("gradient descent diverged", k, 0);
    if (k % config.eval_every == 0 || k == config.steps) record(k);
  }
  return out;
}

void SweepConfig::validate() const {
  if (kappas.empty()) throw InvalidArgument("kappa sweep needs at least one kappa");
  for (double k : kappas) {
    if (!(k > 0.0) || !std::isfinite(k)) throw InvalidArgument("kappa values must be positive");
  }
  if (n < 1 || trials < 1) throw InvalidArgument("sweep n and trials must be >= 1");
  if (!(eta > 0.0)) throw InvalidArgument("step size must be positive");
  if (!(gamma > 0.0) || !(gamma0 > 0.0)) throw InvalidArgument("gamma and gamma0 must be positive");
  if (!(collapse_tol > 0.0 && collapse_tol < 0.5)) {
    throw InvalidArgument("collapse tolerance must lie in (0, 0.5)");
  }
}

std::vector<SweepRow> kappa_sweep(const SweepConfig& config) {
  config.validate();
  struct Job {
    std::size_t kappa_index;
    std::size_t trial;
  };
  struct Outcome {
    bool separable = false;
    double collapse = 0.0;
  };
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < config.kappas.size(); ++a) {
    for (std::size_t t = 0; t < config.trials; ++t) jobs.push_back({a, t});
  }
  std::vector<Outcome> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());

  auto dim_of = [&](std::size_t a) {
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.kappas[a] * static_cast<double>(config.n))));
  };
  auto run_job = [&](std::size_t j) {
    const Job& job = jobs[j];
    const std::size_t dim = dim_of(job.kappa_index);
    const std::uint64_t seed =
        Rng::stream(config.seed, "kappa", job.kappa_index * 1000003ULL + job.trial).next();
    const auto data =
        generate_logistic_dataset(LogisticModelSpec::aligned(dim, config.gamma), config.n, seed);
    Outcome r;
    r.separable = separability_check(data);
    const double eta =
        std::min(config.eta, 4.0 * static_cast<double>(config.n) / spectral_norm_sq(data.features()));
    const auto start = initialize_on_sphere(Architecture::logistic(dim), config.gamma0, seed);
    Vec theta = Eigen::Map<const Vec>(start.weights().data(), static_cast<Eigen::Index>(dim));
    const auto run = gradient_descent(data.features(), data.outcomes(), std::move(theta), eta,
                                      config.steps);
    r.collapse = collapse_of(run.train_logits, config.collapse_tol);
    results[j] = r;
  };

  // Trials are independent; each writes only its own slot.
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        run_job(j);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const std::size_t workers = worker_count(config.threads, jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<SweepRow> rows;
  for (std::size_t a = 0; a < config.kappas.size(); ++a) {
    SweepRow row;
    row.kappa = config.kappas[a];
    row.dim = dim_of(a);
    for (std::size_t t = 0; t < config.trials; ++t) {
      const Outcome& r = results[a * config.trials + t];
      row.separable_rate += r.separable ? 1.0 : 0.0;
      row.mean_final_collapse += r.collapse;
    }
    row.separable_rate /= static_cast<double>(config.trials);
    row.mean_final_collapse /= static_cast<double>(config.trials);
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> isotonic_fit(std::span<const double> values) {
  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };
  std::vector<Block> blocks;
  for (double v : values) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      const Block top = blocks.back();
      blocks.pop_back();
      blocks.back().sum += top.sum;
      blocks.back().count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean());
  return out;
}

void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "k,mse_p,train_ce,collapse_fraction\n";
  for (const auto& p : trajectory.points) {
    out << p.k << ',' << format_double(p.mse_p) << ',' << format_double(p.train_ce) << ','
        << format_double(p.collapse_fraction) << '\n';
  }
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "kappa,separable_rate,mean_final_collapse\n";
  for (const auto& r : rows) {
    out << format_double(r.kappa) << ',' << format_double(r.separable_rate) << ','
        << format_double(r.mean_final_collapse) << '\n';
  }
}

}  // namespace probest
