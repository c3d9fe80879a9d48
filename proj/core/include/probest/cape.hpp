#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "probest/model.hpp"

namespace probest {

/// Per-example estimate of P(y=1 | model output near p_hat_i).
struct EmpProbs {
  std::vector<double> values;
};

/// Quantile bins over the predictions; each example gets its bin's mean
/// outcome.
EmpProbs bin_emp_probs(std::span<const double> preds, std::span<const int> outcomes,
                       std::size_t num_bins);

/// Gaussian-kernel average of the outcomes of the r predictions nearest to
/// p_hat_i, weights exp(-(p_hat_i - p_hat_j)^2 / sigma^2).
///
/// The neighborhood always contains i itself; the remaining r-1 neighbors are
/// chosen by distance, ties going to the smaller index. Cost is one sort plus
/// O(N r).
EmpProbs kernel_emp_probs(std::span<const double> preds, std::span<const int> outcomes,
                          std::size_t neighbors, double sigma);

/// Cross-entropy against empirical probabilities. `emp` is indexed like
/// `batch.targets` would be: one value per batch row.
LossGrad calibration_loss_grad(const ModelParams& params, const BatchView& batch,
                               double clamp_eps = kDefaultClampEps);

struct BinEstimator {
  std::size_t bins = 20;
};

struct KernelEstimator {
  std::size_t neighbors = 0;  ///< 0 selects round(N/10), at least 10
  double sigma = 0.05;
};

using EmpEstimator = std::variant<BinEstimator, KernelEstimator>;

enum class CapeMode {
  Alternating,  ///< calibration loss on epochs t with t % m == 0
  Weighted,     ///< (1 - lambda) L_D + lambda L_C every epoch
};

struct CapeConfig {
  std::size_t m = 5;
  EmpEstimator estimator = BinEstimator{};
  CapeMode mode = CapeMode::Alternating;
  double lambda = 0.5;
  std::size_t epochs = 100;
  double lr = 0.05;
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;
  double clamp_eps = kDefaultClampEps;
  std::size_t ece_bins = 15;

  void validate() const;
};

/// Empirical probabilities of the training rows under the current model,
/// returned indexed by dataset row (non-training rows hold 0).
EmpProbs estimate_emp_probs(const ModelParams& params, const LabeledDataset& dataset,
                            std::span<const std::size_t> train_rows,
                            const EmpEstimator& estimator);

enum class CapePhase { Discrimination, Calibration, Weighted };

struct CapeHistory {
  TrainHistory history;
  std::vector<CapePhase> phases;     ///< loss used in each recorded epoch
  std::vector<bool> emp_refreshed;   ///< empirical probabilities recomputed this epoch
};

struct CapeResult {
  ModelParams params;
  CapeHistory history;
};

/// Fine-tunes an early-stopped cross-entropy model by alternating the
/// discrimination loss (observed outcomes) with the calibration loss
/// (empirical probabilities from the model's own training-set outputs).
/// Returns the epoch with the lowest validation Brier score, earliest on ties.
CapeResult cape_train(ModelParams warm_model, const LabeledDataset& dataset, const Split& split,
                      const CapeConfig& config, const EpochObserver& observer = {});

/// Ablation: the same loop from a seeded random initialization.
CapeResult cape_from_scratch(const Architecture& arch, const LabeledDataset& dataset,
                             const Split& split, const CapeConfig& config,
                             const EpochObserver& observer = {});

/// TrainHistory columns plus `loss_kind_this_epoch,emp_refresh`.
void write_cape_history_csv(const CapeHistory& history, const std::filesystem::path& path);

}  // namespace probest
