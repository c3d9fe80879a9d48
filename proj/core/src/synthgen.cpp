#include "probest/synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "probest/error.hpp"
#include "probest/rng.hpp"

namespace probest {

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::Linear: return "linear";
    case Scenario::Sigmoid: return "sigmoid";
    case Scenario::Skewed: return "skewed";
    case Scenario::Centered: return "centered";
    case Scenario::Discrete: return "discrete";
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Scenario s : {Scenario::Linear, Scenario::Sigmoid, Scenario::Skewed,
                     Scenario::Centered, Scenario::Discrete}) {
    if (lower == to_string(s)) return s;
  }
  throw InvalidArgument("unknown scenario '" + std::string(name) + "'");
}

double scenario_prob(Scenario scenario, double z) {
  if (!(z >= 1.0 && z <= 100.0)) {
    throw InvalidArgument("latent z must lie in [1,100], got " + std::to_string(z));
  }
  switch (scenario) {
    case Scenario::Linear: return z / 100.0;
    case Scenario::Sigmoid: return sigmoid(25.0 * (z / 100.0 - 0.29));
    case Scenario::Skewed: return z / 250.0;
    case Scenario::Centered: return z / 300.0 + 0.35;
    case Scenario::Discrete: {
      const int steps = (z > 20.0) + (z > 40.0) + (z > 60.0) + (z > 80.0);
      return 0.2 * steps + 0.1;
    }
  }
  throw InvalidArgument("unknown scenario");
}

LabeledDataset generate_scenario_dataset(Scenario scenario, std::size_t n,
                                         std::size_t d, double noise_sd,
                                         std::uint64_t seed) {
  if (n < 1 || d < 1) throw InvalidArgument("scenario dataset needs n >= 1 and d >= 1");
  if (!(noise_sd >= 0.0)) throw InvalidArgument("noise_sd must be non-negative");

  Rng latent_rng = Rng::stream(seed, "scenario/latent");
  Rng feature_rng = Rng::stream(seed, "scenario/features");

  std::vector<double> z(n);
  std::vector<double> p(n);
  FeatureMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = static_cast<double>(1 + latent_rng.below(100));
    p[i] = scenario_prob(scenario, z[i]);
    const auto r = static_cast<Eigen::Index>(i);
    double signal = z[i] / 100.0;
    if (noise_sd > 0.0) signal += noise_sd * feature_rng.normal();
    x(r, 0) = signal;
    for (std::size_t j = 1; j < d; ++j) x(r, static_cast<Eigen::Index>(j)) = feature_rng.normal();
  }
  std::vector<int> y = sample_outcomes(p, mix64(seed ^ 0x6f7574636f6d6573ULL));
  return LabeledDataset(std::move(x), std::move(y), std::move(p), std::move(z));
}

std::vector<int> sample_outcomes(std::span<const double> probs, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "outcomes");
  std::vector<int> y(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) {
      throw InvalidArgument("probabilities must lie in [0,1]");
    }
    y[i] = rng.bernoulli(probs[i]) ? 1 : 0;
  }
  return y;
}

std::vector<int> resample_outcomes(const LabeledDataset& dataset,
                                   std::uint64_t epoch, std::uint64_t seed) {
  if (!dataset.has_truth()) {
    throw InvalidState("resampling outcomes requires ground-truth probabilities");
  }
  const auto p = dataset.truth_probs();
  Rng rng = Rng::stream(seed, "resample", epoch);
  std::vector<int> y(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) y[i] = rng.bernoulli(p[i]) ? 1 : 0;
  return y;
}

LogisticModelSpec LogisticModelSpec::aligned(std::size_t dim, double gamma) {
  LogisticModelSpec spec;
  spec.dim = dim;
  spec.gamma = gamma;
  spec.theta_star.assign(dim, 0.0);
  if (dim > 0) spec.theta_star[0] = gamma;
  spec.validate();
  return spec;
}

void LogisticModelSpec::validate() const {
  if (dim < 1) throw InvalidArgument("logistic model dimension must be >= 1");
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  if (theta_star.size() != dim) throw InvalidArgument("theta_star length != dim");
  double sq = 0.0;
  for (double v : theta_star) sq += v * v;
  if (std::abs(std::sqrt(sq) - gamma) > 1e-9) {
    throw InvalidArgument("||theta_star|| must equal gamma");
  }
}

LabeledDataset generate_logistic_dataset(const LogisticModelSpec& spec,
                                         std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw InvalidArgument("logistic dataset needs n >= 1");
  Rng rng = Rng::stream(seed, "logistic/features");
  FeatureMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
  }
  const Eigen::Map<const Eigen::VectorXd> theta(spec.theta_star.data(),
                                                static_cast<Eigen::Index>(spec.dim));
  const Eigen::VectorXd logits = x * theta;
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = sigmoid(logits(static_cast<Eigen::Index>(i)));
  std::vector<int> y = sample_outcomes(p, mix64(seed ^ 0x6c6f676973746963ULL));
  return LabeledDataset(std::move(x), std::move(y), std::move(p));
}

}  // namespace probest
