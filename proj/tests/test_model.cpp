#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "probest/error.hpp"
#include "probest/metrics.hpp"
#include "probest/model.hpp"
#include "probest/rng.hpp"
#include "probest/synthgen.hpp"

using namespace probest;

namespace {

struct Instance {
  ModelParams params;
  FeatureMatrix x;
  std::vector<std::size_t> rows;
  std::vector<double> targets;
};

// Smallest |pre-activation| of the hidden layer over the batch; FD checks
// skip instances that sit next to a ReLU kink.
double min_preactivation(const Instance& in) {
  const auto& a = in.params.arch();
  if (a.kind != ArchKind::Mlp) return INFINITY;
  const auto w = in.params.weights();
  double m = INFINITY;
  for (Eigen::Index r = 0; r < in.x.rows(); ++r) {
    for (std::size_t h = 0; h < a.hidden; ++h) {
      double s = w[a.hidden * a.input_dim + h];
      for (std::size_t j = 0; j < a.input_dim; ++j) s += w[h * a.input_dim + j] * in.x(r, j);
      m = std::min(m, std::abs(s));
    }
  }
  return m;
}

Instance random_instance(Rng& rng, bool mlp, bool soft_targets) {
  for (;;) {
    const std::size_t d = 1 + rng.below(5);
    const auto arch = mlp ? Architecture::mlp(d, 1 + rng.below(6)) : Architecture::logistic(d);
    std::vector<double> w(arch.param_count());
    for (double& v : w) v = 0.8 * rng.normal();
    Instance in{ModelParams(arch, w), FeatureMatrix(8, static_cast<Eigen::Index>(d)), {}, {}};
    for (Eigen::Index i = 0; i < in.x.rows(); ++i) {
      for (Eigen::Index j = 0; j < in.x.cols(); ++j) in.x(i, j) = rng.normal();
      in.rows.push_back(static_cast<std::size_t>(i));
      in.targets.push_back(soft_targets ? rng.uniform() : (rng.bernoulli(0.5) ? 1.0 : 0.0));
    }
    if (min_preactivation(in) > 1e-3) return in;
  }
}

double max_rel_error(const Instance& in, const LossSpec& loss) {
  const BatchView batch{in.x, in.rows, in.targets};
  const auto analytic = loss_grad(in.params, batch, loss);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.grad.size(); ++k) {
    ModelParams plus = in.params, minus = in.params;
    plus.weights()[k] += h;
    minus.weights()[k] -= h;
    const double fd = (loss_grad(plus, batch, loss).loss - loss_grad(minus, batch, loss).loss) /
                      (2.0 * h);
    const double a = analytic.grad[k];
    worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-4}));
  }
  return worst;
}

LabeledDataset half_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix x(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = rng.normal();
  }
  std::vector<double> p(n, 0.5);
  return LabeledDataset(x, sample_outcomes(p, seed + 1), p);
}

}  // namespace

TEST(Forward, LogisticExamples) {
  const auto zero = ModelParams::zeros(Architecture::logistic(3));
  const std::vector<double> x{1.0, -2.0, 3.0};
  EXPECT_DOUBLE_EQ(forward(zero, x), 0.5);
  const ModelParams e1(Architecture::logistic(2), {1.0, 0.0});
  const std::vector<double> x2{std::log(3.0), 5.0};
  EXPECT_NEAR(forward(e1, x2), 0.75, 1e-15);
}

TEST(Forward, MlpZeroWeightsAndWidthCheck) {
  const auto zero = ModelParams::zeros(Architecture::mlp(4, 32));
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(forward(zero, x), 0.5);
  const std::vector<double> bad{1.0};
  EXPECT_THROW(forward(zero, bad), InvalidArgument);
}

TEST(Forward, MlpMatchesHandComputation) {
  // d=2, H=2: W1 = [[1, -1], [0.5, 2]], b1 = [0, -1], w2 = [2, -3], b2 = 0.25
  const ModelParams p(Architecture::mlp(2, 2), {1, -1, 0.5, 2, 0, -1, 2, -3, 0.25});
  const std::vector<double> x{1.0, 0.5};
  // h = relu([0.5, 0.5 + 1 - 1]) = [0.5, 0.5]; z = 1 - 1.5 + 0.25 = -0.25
  EXPECT_NEAR(logit(p, x), -0.25, 1e-15);
}

TEST(ModelParams, RejectsWrongSizeAndNonFinite) {
  EXPECT_THROW(ModelParams(Architecture::logistic(3), {1.0}), InvalidArgument);
  EXPECT_THROW(ModelParams(Architecture::logistic(1), {NAN}), InvalidArgument);
  EXPECT_EQ(Architecture::mlp(16, 32).param_count(), 16u * 32 + 32 + 32 + 1);
}

TEST(Losses, HandValues) {
  FeatureMatrix x(1, 1);
  x << 0.0;
  const std::vector<std::size_t> rows{0};
  const std::vector<double> y1{1.0};
  const auto zero = ModelParams::zeros(Architecture::logistic(1));
  const BatchView b{x, rows, y1};
  EXPECT_NEAR(ce_loss_grad(zero, b).loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(focal_loss_grad(zero, b, 2.0).loss, 0.25 * std::log(2.0), 1e-15);
  EXPECT_NEAR(entropy_penalty_loss_grad(zero, b, 1.0).loss, 0.0, 1e-15);
}

TEST(Losses, ConfidentCorrectPredictionIsClamped) {
  FeatureMatrix x(1, 1);
  x << 100.0;
  const std::vector<std::size_t> rows{0};
  const std::vector<double> y{1.0};
  const ModelParams p(Architecture::logistic(1), {1.0});
  const auto r = ce_loss_grad(p, {x, rows, y}, 1e-7);
  EXPECT_LE(r.loss, -std::log1p(-1e-7) + 1e-15);
  EXPECT_EQ(r.grad[0], 0.0);
}

TEST(Losses, ZeroBetaReducesToCrossEntropy) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto in = random_instance(rng, t % 2 == 0, false);
    const BatchView b{in.x, in.rows, in.targets};
    const auto ce = ce_loss_grad(in.params, b);
    for (const auto& other :
         {focal_loss_grad(in.params, b, 0.0), entropy_penalty_loss_grad(in.params, b, 0.0)}) {
      EXPECT_NEAR(other.loss, ce.loss, 1e-12);
      for (std::size_t k = 0; k < ce.grad.size(); ++k) EXPECT_NEAR(other.grad[k], ce.grad[k], 1e-12);
    }
  }
}

TEST(Losses, FocalRejectsSoftTargets) {
  FeatureMatrix x(1, 1);
  x << 0.0;
  const std::vector<std::size_t> rows{0};
  const std::vector<double> t{0.3};
  EXPECT_THROW(focal_loss_grad(ModelParams::zeros(Architecture::logistic(1)), {x, rows, t}, 1.0),
               InvalidArgument);
}

class GradientCheck : public ::testing::TestWithParam<LossKind> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  Rng rng(1000 + static_cast<int>(GetParam()));
  for (int t = 0; t < 100; ++t) {
    const bool soft = GetParam() == LossKind::CrossEntropy && t % 2 == 1;
    const auto in = random_instance(rng, t % 2 == 0, soft);
    const LossSpec loss{GetParam(), 0.5 + 2.0 * rng.uniform()};
    ASSERT_LT(max_rel_error(in, loss), 1e-5) << "instance " << t;
  }
}

INSTANTIATE_TEST_SUITE_P(AllLosses, GradientCheck,
                         ::testing::Values(LossKind::CrossEntropy, LossKind::Focal,
                                           LossKind::EntropyPenalty));

TEST(Train, ConstantTruthGivesHalfPredictions) {
  const auto d = half_dataset(2000, 3);
  const auto s = split(d, {0.7, 0.15, 0.15}, 1);
  TrainConfig c;
  c.arch = Architecture::logistic(3);
  c.epochs = 30;
  c.seed = 2;
  const auto r = train(d, s, c);
  const auto p = predict(r.params, d.features(), s.test);
  const double mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
  EXPECT_GE(mean, 0.45);
  EXPECT_LE(mean, 0.55);
}

TEST(Train, DeterministicHistories) {
  const auto d = generate_scenario_dataset(Scenario::Linear, 1500, 4, 0.05, 2);
  const auto s = split(d, {0.7, 0.15, 0.15}, 3);
  TrainConfig c;
  c.arch = Architecture::mlp(4, 8);
  c.epochs = 15;
  c.seed = 9;
  const auto a = train(d, s, c);
  const auto b = train(d, s, c);
  ASSERT_EQ(a.history.records.size(), b.history.records.size());
  for (std::size_t i = 0; i < a.history.records.size(); ++i) {
    EXPECT_EQ(a.history.records[i].train_loss, b.history.records[i].train_loss);
    EXPECT_EQ(a.history.records[i].val_loss, b.history.records[i].val_loss);
  }
  EXPECT_EQ(a.params, b.params);
}

TEST(Train, EarlyStoppingDominanceAndHistoryShape) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = generate_scenario_dataset(Scenario::Sigmoid, 800, 8, 0.05, seed);
    const auto s = split(d, {0.6, 0.2, 0.2}, seed);
    TrainConfig c;
    c.arch = Architecture::mlp(8, 16);
    c.epochs = 60;
    c.patience = 5;
    c.lr = 0.2;
    c.seed = seed;
    const auto r = train(d, s, c);
    const auto& recs = r.history.records;
    ASSERT_FALSE(recs.empty());
    EXPECT_LE(recs.size(), c.epochs);
    ASSERT_GE(r.history.best_epoch, 1u);
    ASSERT_LE(r.history.best_epoch, recs.size());
    const double best = recs[r.history.best_epoch - 1].val_loss;
    EXPECT_LE(best, recs.back().val_loss);
    for (const auto& rec : recs) EXPECT_GE(rec.val_loss, best);
    EXPECT_NEAR(validation_stats(r.params, d, s.val, c.clamp_eps, c.ece_bins).ce, best, 1e-12);
    if (recs.size() < c.epochs) EXPECT_EQ(recs.size(), r.history.best_epoch + c.patience);
  }
}

TEST(Train, OverparametrizedLogisticMemorizes) {
  LogisticModelSpec spec = LogisticModelSpec::aligned(500, 1.0);
  const auto d = generate_logistic_dataset(spec, 500, 5);
  const auto s = split(d, {0.99, 0.005, 0.005}, 1);
  TrainConfig c;
  c.arch = Architecture::logistic(500);
  c.epochs = 300;
  c.patience = 0;
  c.batch_size = 32;
  c.lr = 0.5;
  c.seed = 1;
  const auto r = train(d, s, c);
  EXPECT_LT(r.history.records.back().train_loss, 0.01);
}

TEST(Train, DivergenceNamesEpochAndBatch) {
  const auto d = generate_scenario_dataset(Scenario::Linear, 200, 2, 0.0, 1);
  const auto s = split(d, {0.6, 0.2, 0.2}, 1);
  ModelParams p(Architecture::logistic(2), {0.0, 0.0});
  p.weights()[0] = NAN;
  const std::vector<double> targets(d.size(), 1.0);
  try {
    sgd_epoch(p, d.features(), s.train, targets, {}, 0.1, 16, 1e-7, 0, 3);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.epoch(), 3u);
    EXPECT_EQ(e.batch(), 0u);
  }
}

TEST(TrainProperty, ResampledLabelsBeatFixedLabelFullTraining) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = generate_scenario_dataset(Scenario::Linear, 1000, 16, 0.0, 50 + seed);
    const auto s = split(d, {0.7, 0.15, 0.15}, seed);
    TrainConfig c;
    c.arch = Architecture::mlp(16, 32);
    c.epochs = 150;
    c.patience = 0;
    c.lr = 0.1;
    c.batch_size = 32;
    c.seed = seed;
    auto final_msep = [&](bool resample) {
      TrainConfig cc = c;
      cc.resample = resample;
      std::optional<ModelParams> last;
      train(d, s, cc, [&](std::size_t, const ModelParams& p) { last = p; });
      return *evaluate(predict_set(*last, d, s.test)).mse_p;
    };
    wins += final_msep(true) <= final_msep(false) ? 1 : 0;
  }
  EXPECT_GE(wins, 8);
}

TEST(Ensemble, AveragesMemberOutputs) {
  const std::vector<ModelParams> two{ModelParams(Architecture::logistic(1), {std::log(0.25)}),
                                     ModelParams(Architecture::logistic(1), {std::log(4.0)})};
  const std::vector<double> x{1.0};
  EXPECT_NEAR(ensemble_predict(two, x), 0.5, 1e-15);
  const std::vector<ModelParams> one{two[0]};
  EXPECT_EQ(ensemble_predict(one, x), forward(two[0], x));
  const std::vector<ModelParams> zeros(3, ModelParams::zeros(Architecture::mlp(1, 4)));
  EXPECT_DOUBLE_EQ(ensemble_predict(zeros, x), 0.5);
  EXPECT_THROW(ensemble_predict(std::vector<ModelParams>{}, x), InvalidArgument);
}

TEST(Checkpoint, JsonRoundTripIsExact) {
  const auto p = initialize(Architecture::mlp(5, 7), 11);
  const auto q = model_from_json(model_to_json(p));
  EXPECT_EQ(p, q);
  const auto path = std::filesystem::temp_directory_path() / "probest_model.json";
  save_model(p, path);
  EXPECT_EQ(load_model(path), p);
  EXPECT_THROW(model_from_json("{\"format\":\"other\"}"), InvalidArgument);
}
