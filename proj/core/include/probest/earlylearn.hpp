#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "probest/data.hpp"

namespace probest {

struct TrajectoryPoint {
  std::size_t k = 0;  ///< gradient step
  double mse_p = 0.0;
  double train_ce = 0.0;
  double collapse_fraction = 0.0;
};

struct TrajectoryConfig {
  std::size_t n = 500;
  std::size_t dim = 500;
  double gamma = 1.0;         ///< norm of the true parameter
  double gamma0 = 1.0;        ///< radius of the initialization sphere
  double eta = 0.5;
  std::size_t steps = 20000;
  std::size_t eval_every = 100;
  std::uint64_t seed = 0;
  bool resample = false;      ///< fresh labels from the true model at every step
  std::size_t holdout = 5000; ///< fresh points for the MSE_p estimate
  double collapse_tol = 1e-2;

  void validate() const;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;  ///< k = 0 and every eval_every steps, plus the last step
  double curvature_bound = 0.0;  ///< 2n / ||X||^2 (spectral norm)
  double descent_bound = 0.0;    ///< 8n / ||X||^2; eta must stay below this
  bool separable = false;        ///< of the fixed-label training set
};

/// Full-batch gradient descent on the mean logistic loss of a well-specified
/// logistic dataset, started uniformly on the sphere of radius gamma0.
///
/// Throws InvalidArgument when eta >= 8n/||X||^2, above which the loss
/// Hessian bound ||X||^2/(4n) no longer guarantees descent.
Trajectory run_trajectory(const TrajectoryConfig& config);

/// Fraction of entries within tol of 0 or 1. tol must lie in (0, 0.5).
double collapse_fraction(std::span<const double> probs, double tol);

/// Exact linear separability of (x_i, 2y_i - 1) by a hyperplane through the
/// origin. Single-class data is trivially separable.
bool separability_check(const LabeledDataset& dataset);

/// Squared spectral norm of the feature matrix.
double spectral_norm_sq(const FeatureMatrix& x);

struct SweepConfig {
  std::vector<double> kappas{0.05, 0.5, 2.0, 5.0, 10.0};
  std::size_t n = 500;
  double gamma = 1.0;
  double gamma0 = 1.0;
  std::size_t trials = 50;
  std::size_t steps = 1000;  ///< GD budget per trial for the collapse figure
  double eta = 0.5;          ///< capped per trial at 4n/||X||^2
  double collapse_tol = 1e-2;
  std::uint64_t seed = 0;
  std::size_t threads = 0;   ///< 0 = hardware concurrency

  void validate() const;
};

struct SweepRow {
  double kappa = 0.0;
  std::size_t dim = 0;
  double separable_rate = 0.0;
  double mean_final_collapse = 0.0;
};

/// For every kappa, `trials` independent datasets with dim = max(1, round(kappa n)).
std::vector<SweepRow> kappa_sweep(const SweepConfig& config);

/// Least-squares nondecreasing fit (pool adjacent violators, equal weights).
std::vector<double> isotonic_fit(std::span<const double> values);

/// `k,mse_p,train_ce,collapse_fraction`
void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path);
/// `kappa,separable_rate,mean_final_collapse`
void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);

}  // namespace probest
