#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace probest {

using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Feature matrix with binary outcomes and, for synthetic data, the latent
/// ground-truth probability of each example (and optionally the scalar latent
/// it was derived from).
///
/// Invariants are checked on construction; the object is immutable afterwards.
class LabeledDataset {
 public:
  LabeledDataset(FeatureMatrix features, std::vector<int> outcomes,
                 std::optional<std::vector<double>> truth_probs = std::nullopt,
                 std::optional<std::vector<double>> latent = std::nullopt);

  std::size_t size() const noexcept { return outcomes_.size(); }
  std::size_t dim() const noexcept {
    return static_cast<std::size_t>(features_.cols());
  }

  const FeatureMatrix& features() const noexcept { return features_; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {features_.data() + i * dim(), dim()};
  }
  std::span<const int> outcomes() const noexcept { return outcomes_; }

  bool has_truth() const noexcept { return truth_probs_.has_value(); }
  /// Throws InvalidState when the dataset carries no truth probabilities.
  std::span<const double> truth_probs() const;

  bool has_latent() const noexcept { return latent_.has_value(); }
  std::span<const double> latent() const;

  /// Rows selected by `indices`, in that order.
  LabeledDataset subset(std::span<const std::size_t> indices) const;
  /// Same features and truth, replaced outcomes.
  LabeledDataset with_outcomes(std::vector<int> outcomes) const;

 private:
  FeatureMatrix features_;
  std::vector<int> outcomes_;
  std::optional<std::vector<double>> truth_probs_;
  std::optional<std::vector<double>> latent_;
};

/// Estimated probabilities aligned with observed outcomes; `truth` is carried
/// along when the data are synthetic.
struct PredictionSet {
  std::vector<double> probs;
  std::vector<int> outcomes;
  std::optional<std::vector<double>> truth;

  std::size_t size() const noexcept { return probs.size(); }
  /// Throws InvalidArgument if lengths differ or values leave their domain.
  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  friend bool operator==(const Split&, const Split&) = default;
};

/// Deterministic train/val/test partition of `n` indices.
///
/// Validation and test sizes are floor(fraction * n) (at least one when the
/// fraction is positive); the remainder goes to train.
Split split(std::size_t n, std::array<double, 3> fractions, std::uint64_t seed);
inline Split split(const LabeledDataset& dataset,
                   std::array<double, 3> fractions, std::uint64_t seed) {
  return split(dataset.size(), fractions, seed);
}

// CSV I/O. Predictions: `prob,outcome[,truth_prob]`.
// Datasets: `f0,...,f{d-1},outcome[,truth_prob][,latent]`.
void save_predictions(const PredictionSet& pred,
                      const std::filesystem::path& path);
PredictionSet load_predictions(const std::filesystem::path& path);

void save_dataset(const LabeledDataset& dataset,
                  const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

/// Shortest decimal text that round-trips `value` exactly.
std::string format_double(double value);

}  // namespace probest
