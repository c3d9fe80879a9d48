#include <gtest/gtest.h>

#include <cmath>

#include "probest/error.hpp"
#include "probest/metrics.hpp"
#include "probest/recal.hpp"
#include "probest/rng.hpp"
#include "probest/synthgen.hpp"

using namespace probest;

namespace {

struct Planted {
  std::vector<double> probs;
  std::vector<int> outcomes;
};

// Reported probabilities sigmoid(s); outcomes drawn from sigmoid(w s + b).
Planted planted(std::size_t n, double w, double b, std::uint64_t seed) {
  Rng rng(seed);
  Planted out;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 1.5 * rng.normal();
    out.probs.push_back(sigmoid(s));
    out.outcomes.push_back(rng.bernoulli(sigmoid(w * s + b)) ? 1 : 0);
  }
  return out;
}

double auc_of(const std::vector<double>& p, const std::vector<int>& y) {
  return auc(PredictionSet{p, y, std::nullopt});
}

}  // namespace

TEST(Recal, ApplyExamples) {
  const std::vector<double> p{0.5, 0.25, 0.9};
  EXPECT_EQ(platt_apply({}, p)[0], 0.5);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(platt_apply({}, p)[i], p[i], 1e-15);
  EXPECT_NEAR(platt_apply({1.0, std::log(3.0)}, std::vector<double>{0.5})[0], 0.75, 1e-15);
  EXPECT_NEAR(temperature_apply({1.0}, p)[1], 0.25, 1e-15);
  EXPECT_NEAR(temperature_apply({0.5}, std::vector<double>{0.75})[0], 0.9, 1e-15);
  EXPECT_THROW(temperature_apply({0.0}, p), InvalidArgument);
}

TEST(Recal, SafeLogitClamps) {
  EXPECT_TRUE(std::isfinite(safe_logit(0.0)));
  EXPECT_TRUE(std::isfinite(safe_logit(1.0)));
  EXPECT_NEAR(safe_logit(0.75), std::log(3.0), 1e-15);
}

TEST(Recal, RecoversPlantedPlattDistortion) {
  const auto d = planted(50000, 2.0, 1.0, 7);
  const auto fit = platt_fit(d.probs, d.outcomes);
  EXPECT_NEAR(fit.w, 2.0, 0.1);
  EXPECT_NEAR(fit.b, 1.0, 0.05);
}

TEST(Recal, RecoversPlantedTemperature) {
  const auto d = planted(50000, 2.0, 0.0, 8);
  const auto fit = temperature_fit(d.probs, d.outcomes);
  EXPECT_GE(fit.T, 0.45);
  EXPECT_LE(fit.T, 0.55);
}

TEST(Recal, SingleClassFails) {
  const std::vector<double> p{0.2, 0.7, 0.4};
  const std::vector<int> y{1, 1, 1};
  EXPECT_THROW(platt_fit(p, y), FitError);
  EXPECT_THROW(temperature_fit(p, y), FitError);
}

TEST(Recal, PreservesRanking) {
  const auto d = planted(5000, 0.7, -0.3, 9);
  const auto pf = platt_fit(d.probs, d.outcomes);
  const auto tf = temperature_fit(d.probs, d.outcomes);
  const double base = auc_of(d.probs, d.outcomes);
  EXPECT_EQ(auc_of(platt_apply(pf, d.probs), d.outcomes), base);
  EXPECT_EQ(auc_of(temperature_apply(tf, d.probs), d.outcomes), base);
}

TEST(RecalProperty, FitsNeverWorseThanIdentityAndPlattDominatesTemperature) {
  Rng rng(10);
  for (int t = 0; t < 40; ++t) {
    const double w = 0.2 + 3.0 * rng.uniform();
    const double b = 2.0 * rng.uniform() - 1.0;
    const auto d = planted(200 + rng.below(2000), w, b, 100 + t);
    const auto pf = platt_fit(d.probs, d.outcomes);
    const auto tf = temperature_fit(d.probs, d.outcomes);
    const double identity = platt_nll({}, d.probs, d.outcomes);
    const double platt = platt_nll(pf, d.probs, d.outcomes);
    const double temp = platt_nll({1.0 / tf.T, 0.0}, d.probs, d.outcomes);
    EXPECT_LE(platt, identity + 1e-9);
    EXPECT_LE(temp, identity + 1e-9);
    EXPECT_GE(temp, platt - 1e-9);
  }
}

TEST(Recal, JsonRoundTrip) {
  const PlattParams p{1.0 / 3.0, -0.1};
  const auto q = platt_from_json(to_json(p));
  EXPECT_EQ(q.w, p.w);
  EXPECT_EQ(q.b, p.b);
  const TempParams t{0.7};
  EXPECT_EQ(temperature_from_json(to_json(t)).T, t.T);
  EXPECT_THROW(platt_from_json("{\"w\":1}"), InvalidArgument);
  EXPECT_THROW(temperature_from_json("not json"), InvalidArgument);
}
