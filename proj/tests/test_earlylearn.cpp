#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "probest/earlylearn.hpp"
#include "probest/error.hpp"
#include "probest/rng.hpp"
#include "probest/synthgen.hpp"

using namespace probest;

namespace {

LabeledDataset rows_dataset(const std::vector<std::vector<double>>& rows, std::vector<int> y) {
  FeatureMatrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return LabeledDataset(std::move(x), std::move(y));
}

double mean_logistic_loss(const LabeledDataset& d, double theta) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double z = theta * d.features()(static_cast<Eigen::Index>(i), 0);
    // log(1 + e^z) - y z
    total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - d.outcomes()[i] * z;
  }
  return total / static_cast<double>(d.size());
}

}  // namespace

TEST(Collapse, Examples) {
  EXPECT_DOUBLE_EQ(collapse_fraction(std::vector<double>{0.001, 0.5, 0.995}, 0.01), 2.0 / 3.0);
  EXPECT_EQ(collapse_fraction(std::vector<double>{0.5, 0.4}, 0.01), 0.0);
  EXPECT_EQ(collapse_fraction(std::vector<double>{0.0, 1.0}, 0.01), 1.0);
  EXPECT_EQ(collapse_fraction(std::vector<double>{0.01}, 0.01), 1.0);
  EXPECT_THROW(collapse_fraction(std::vector<double>{0.5}, 0.5), InvalidArgument);
  EXPECT_THROW(collapse_fraction(std::vector<double>{}, 0.1), InvalidArgument);
}

TEST(Separability, OneDimensionalExamples) {
  EXPECT_TRUE(separability_check(rows_dataset({{1.0}, {2.0}, {-1.0}}, {1, 1, 0})));
  EXPECT_FALSE(separability_check(rows_dataset({{1.0}, {-1.0}, {3.0}}, {1, 1, 0})));
  EXPECT_FALSE(separability_check(rows_dataset({{1.0}, {2.0}}, {1, 0})));
  EXPECT_TRUE(separability_check(rows_dataset({{1.0}, {2.0}}, {1, 1})));
  // A zero row can never get a positive margin.
  EXPECT_FALSE(separability_check(rows_dataset({{0.0}, {2.0}, {-1.0}}, {1, 1, 0})));
}

TEST(Separability, ThresholdExamples) {
  EXPECT_TRUE(separability_check(rows_dataset({{-1.0}, {1.0}}, {0, 1})));
  EXPECT_FALSE(separability_check(rows_dataset({{-1.0}, {1.0}, {-2.0}, {2.0}}, {1, 0, 0, 1})));
}

TEST(Separability, WideGaussianDataIsSeparable) {
  int separable = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    separable += separability_check(
                     generate_logistic_dataset(LogisticModelSpec::aligned(500, 1.0), 100, seed))
                     ? 1
                     : 0;
  }
  EXPECT_GE(separable, 99);
}

TEST(Separability, TallGaussianDataIsNot) {
  SweepConfig c;
  c.kappas = {0.01};
  c.n = 2000;
  c.trials = 20;
  c.steps = 1;
  c.threads = 1;
  const auto rows = kappa_sweep(c);
  EXPECT_EQ(rows[0].dim, 20u);
  EXPECT_LE(rows[0].separable_rate, 0.05);
}

TEST(Separability, RankDeficientWideDataFallsBackToLp) {
  // More columns than rows, but a duplicated point with opposite labels.
  Rng rng(4);
  std::vector<std::vector<double>> rows(6, std::vector<double>(10));
  for (auto& r : rows) {
    for (double& v : r) v = rng.normal();
  }
  rows[5] = rows[0];
  EXPECT_FALSE(separability_check(rows_dataset(rows, {1, 0, 1, 0, 1, 0})));
  EXPECT_TRUE(separability_check(rows_dataset(rows, {1, 0, 1, 0, 1, 1})));
}

TEST(SeparabilityProperty, PlantedMarginsAndContradictions) {
  Rng rng(5);
  for (int t = 0; t < 60; ++t) {
    const std::size_t dim = 1 + rng.below(5);
    const std::size_t n = 5 + rng.below(60);
    std::vector<double> u(dim);
    for (double& v : u) v = rng.normal();
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    while (rows.size() < n) {
      std::vector<double> r(dim);
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        r[j] = rng.normal();
        s += r[j] * u[j];
      }
      if (std::abs(s) < 0.1) continue;
      rows.push_back(r);
      y.push_back(s > 0 ? 1 : 0);
    }
    ASSERT_TRUE(separability_check(rows_dataset(rows, y))) << t;
    // x and -x with the same label cannot both sit on the positive side.
    auto neg = rows[0];
    for (double& v : neg) v = -v;
    rows.push_back(neg);
    y.push_back(y[0]);
    ASSERT_FALSE(separability_check(rows_dataset(rows, y))) << t;
  }
}

TEST(SpectralNorm, MatchesKnownValues) {
  FeatureMatrix x(2, 3);
  x << 3, 0, 0, 0, 4, 0;
  EXPECT_NEAR(spectral_norm_sq(x), 16.0, 1e-12);
  EXPECT_NEAR(spectral_norm_sq(FeatureMatrix(x.transpose())), 16.0, 1e-12);
}

TEST(Trajectory, RejectsStepAboveDescentBound) {
  TrajectoryConfig c;
  c.n = 50;
  c.dim = 50;
  c.eta = 10.0;
  c.steps = 1;
  c.holdout = 10;
  EXPECT_THROW(run_trajectory(c), InvalidArgument);
}

TEST(Trajectory, SeparableRunMemorizes) {
  TrajectoryConfig c;
  c.n = 50;
  c.dim = 200;
  c.eta = 0.5;
  c.steps = 20000;
  c.eval_every = 1000;
  c.holdout = 500;
  c.seed = 2;
  const auto t = run_trajectory(c);
  ASSERT_TRUE(t.separable);
  EXPECT_LT(c.eta, t.descent_bound);
  EXPECT_LT(t.points.back().train_ce, 1e-3);
  EXPECT_GT(t.points.back().collapse_fraction, 0.95);
  EXPECT_EQ(t.points.front().k, 0u);
  EXPECT_EQ(t.points.back().k, c.steps);
  EXPECT_EQ(t.points.size(), 21u);
}

TEST(Trajectory, OneDimensionalRunReachesNewtonOptimum) {
  TrajectoryConfig c;
  c.n = 100000;
  c.dim = 1;
  c.eta = 0.5;
  c.steps = 400;
  c.eval_every = 100;
  c.holdout = 2000;
  c.seed = 6;
  const auto t = run_trajectory(c);
  EXPECT_FALSE(t.separable);
  EXPECT_LT(t.points.back().collapse_fraction, 0.05);
  for (const auto& p : t.points) EXPECT_LT(p.collapse_fraction, 0.5);

  const auto d = generate_logistic_dataset(LogisticModelSpec::aligned(1, 1.0), c.n, c.seed);
  double theta = 0.0;
  for (int it = 0; it < 50; ++it) {
    double g = 0.0, h = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double x = d.features()(static_cast<Eigen::Index>(i), 0);
      const double p = sigmoid(theta * x);
      g += (p - d.outcomes()[i]) * x;
      h += p * (1.0 - p) * x * x;
    }
    theta -= g / h;
  }
  EXPECT_NEAR(theta, 1.0, 0.05);
  EXPECT_NEAR(t.points.back().train_ce, mean_logistic_loss(d, theta), 1e-9);
  EXPECT_LT(t.points.back().mse_p, 1e-3);
}

TEST(Trajectory, DefaultRunOverfitsLate) {
  TrajectoryConfig c;
  c.seed = 1;
  const auto t = run_trajectory(c);
  double best = INFINITY;
  for (const auto& p : t.points) {
    best = std::min(best, p.mse_p);
    EXPECT_TRUE(std::isfinite(p.mse_p) && p.mse_p >= 0.0);
  }
  EXPECT_GE(t.points.back().mse_p, 1.5 * best);
  for (std::size_t i = 1; i < t.points.size(); ++i) EXPECT_GT(t.points[i].k, t.points[i - 1].k);
}

TEST(Trajectory, HalvedStepTracksSameCurve) {
  TrajectoryConfig c;
  c.n = 200;
  c.dim = 200;
  c.steps = 200;
  c.eval_every = 20;
  c.holdout = 2000;
  c.eta = 0.2;
  c.seed = 4;
  const auto coarse = run_trajectory(c);
  c.eta = 0.1;
  c.steps = 400;
  c.eval_every = 40;
  const auto fine = run_trajectory(c);
  ASSERT_EQ(coarse.points.size(), fine.points.size());
  for (std::size_t i = 0; i < coarse.points.size(); ++i) {
    EXPECT_NEAR(coarse.points[i].mse_p, fine.points[i].mse_p, 0.05 * fine.points[i].mse_p) << i;
  }
}

TEST(Trajectory, ResampledRunIsDeterministicAndDiffers) {
  TrajectoryConfig c;
  c.n = 100;
  c.dim = 100;
  c.steps = 300;
  c.holdout = 500;
  c.resample = true;
  const auto a = run_trajectory(c);
  const auto b = run_trajectory(c);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].mse_p, b.points[i].mse_p);
  c.resample = false;
  const auto fixed = run_trajectory(c);
  EXPECT_EQ(fixed.points[0].mse_p, a.points[0].mse_p);
  EXPECT_NE(fixed.points.back().mse_p, a.points.back().mse_p);
}

TEST(Isotonic, PoolsViolators) {
  EXPECT_EQ(isotonic_fit(std::vector<double>{1, 3, 2}), (std::vector<double>{1, 2.5, 2.5}));
  EXPECT_EQ(isotonic_fit(std::vector<double>{3, 2, 1}), (std::vector<double>{2, 2, 2}));
  EXPECT_EQ(isotonic_fit(std::vector<double>{0, 0.5, 1}), (std::vector<double>{0, 0.5, 1}));
  EXPECT_TRUE(isotonic_fit(std::vector<double>{}).empty());
}

TEST(IsotonicProperty, MonotoneAndMeanPreserving) {
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + rng.below(30));
    for (double& x : v) x = rng.uniform();
    const auto f = isotonic_fit(v);
    double sv = 0.0, sf = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      sv += v[i];
      sf += f[i];
      if (i) ASSERT_LE(f[i - 1], f[i]);
    }
    EXPECT_NEAR(sv, sf, 1e-12);
  }
}

TEST(Sweep, SmallSweepShape) {
  SweepConfig c;
  c.kappas = {0.05, 5.0};
  c.n = 40;
  c.trials = 6;
  c.steps = 50;
  c.threads = 2;
  const auto rows = kappa_sweep(c);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].dim, 2u);
  EXPECT_EQ(rows[1].dim, 200u);
  EXPECT_EQ(rows[1].separable_rate, 1.0);
  for (const auto& r : rows) {
    EXPECT_GE(r.separable_rate, 0.0);
    EXPECT_LE(r.separable_rate, 1.0);
  }
  c.threads = 1;
  const auto again = kappa_sweep(c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(again[i].separable_rate, rows[i].separable_rate);
    EXPECT_EQ(again[i].mean_final_collapse, rows[i].mean_final_collapse);
  }
}

TEST(EarlyLearnCsv, Schemas) {
  Trajectory t;
  t.points.push_back({0, 0.25, 0.7, 0.0});
  t.points.push_back({100, 0.125, 0.01, 1.0});
  const auto dir = std::filesystem::temp_directory_path();
  write_trajectory_csv(t, dir / "probest_traj.csv");
  std::ifstream in(dir / "probest_traj.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k,mse_p,train_ce,collapse_fraction");
  std::getline(in, line);
  EXPECT_EQ(line, "0,0.25,0.7,0");
  const std::vector<SweepRow> rows{{0.5, 250, 0.0, 0.1}};
  write_sweep_csv(rows, dir / "probest_sweep.csv");
  std::ifstream sin(dir / "probest_sweep.csv");
  std::getline(sin, line);
  EXPECT_EQ(line, "kappa,separable_rate,mean_final_collapse");
}
