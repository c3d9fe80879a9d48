#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "probest/data.hpp"

namespace probest {

/// Shape of the latent-to-risk map z -> p over integer ages z in {1..100}.
enum class Scenario { Linear, Sigmoid, Skewed, Centered, Discrete };

std::string_view to_string(Scenario s) noexcept;
/// Case-insensitive; throws InvalidArgument on unknown names.
Scenario parse_scenario(std::string_view name);

inline double sigmoid(double t) noexcept;

/// Ground-truth probability for latent z in [1, 100].
double scenario_prob(Scenario scenario, double z);

/// Scenario dataset: z ~ Uniform{1..100}, p = scenario_prob(z), y ~ Bern(p).
/// Feature 0 is z/100 plus N(0, noise_sd^2); features 1..d-1 are standard
/// normal distractors.
LabeledDataset generate_scenario_dataset(Scenario scenario, std::size_t n,
                                         std::size_t d, double noise_sd,
                                         std::uint64_t seed);

/// Independent Bernoulli draws.
std::vector<int> sample_outcomes(std::span<const double> probs, std::uint64_t seed);

/// Fresh outcome vector for `epoch`, drawn from the dataset's truth
/// probabilities. Throws InvalidState when truth is absent.
std::vector<int> resample_outcomes(const LabeledDataset& dataset,
                                   std::uint64_t epoch, std::uint64_t seed);

/// Well-specified logistic model P(y=1|x) = sigmoid(<theta*, x>), x ~ N(0, I).
struct LogisticModelSpec {
  std::size_t dim = 1;
  double gamma = 1.0;
  std::vector<double> theta_star;

  /// theta* = gamma * e_1.
  static LogisticModelSpec aligned(std::size_t dim, double gamma);
  /// Throws InvalidArgument when the invariants do not hold.
  void validate() const;
};

LabeledDataset generate_logistic_dataset(const LogisticModelSpec& spec,
                                         std::size_t n, std::uint64_t seed);

inline double sigmoid(double t) noexcept {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace probest
