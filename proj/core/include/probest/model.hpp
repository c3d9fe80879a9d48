#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probest/data.hpp"

namespace probest {

class Rng;

enum class ArchKind { Logistic, Mlp };

/// Logistic: p = sigmoid(<theta, x>), no intercept.
/// Mlp: p = sigmoid(w2 . relu(W1 x + b1) + b2), one hidden layer.
struct Architecture {
  ArchKind kind = ArchKind::Logistic;
  std::size_t input_dim = 1;
  std::size_t hidden = 0;

  static Architecture logistic(std::size_t input_dim);
  static Architecture mlp(std::size_t input_dim, std::size_t hidden = 32);

  std::size_t param_count() const noexcept;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Flat weight vector for an architecture. MLP layout: W1 (hidden x input,
/// row-major), b1, w2, b2.
class ModelParams {
 public:
  ModelParams(Architecture arch, std::vector<double> weights);
  static ModelParams zeros(Architecture arch);

  const Architecture& arch() const noexcept { return arch_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> weights() noexcept { return weights_; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  Architecture arch_;
  std::vector<double> weights_;
};

/// Gaussian weights with sd 1/sqrt(fan_in), zero biases.
ModelParams initialize(const Architecture& arch, std::uint64_t seed);
/// Logistic weights drawn uniformly from the sphere of the given radius.
ModelParams initialize_on_sphere(const Architecture& arch, double radius, std::uint64_t seed);

/// Pre-sigmoid output. Throws InvalidArgument on width mismatch.
double logit(const ModelParams& params, std::span<const double> x);
/// Probability output, strictly inside (0,1) for finite weights and inputs
/// of moderate size; no clamping is applied here.
double forward(const ModelParams& params, std::span<const double> x);

std::vector<double> predict(const ModelParams& params, const FeatureMatrix& features,
                            std::span<const std::size_t> rows);
/// Predictions for `rows` with outcomes and, when available, truth attached.
PredictionSet predict_set(const ModelParams& params, const LabeledDataset& dataset,
                          std::span<const std::size_t> rows);

// ---------------------------------------------------------------------------
// Losses

inline constexpr double kDefaultClampEps = 1e-7;

enum class LossKind { CrossEntropy, Focal, EntropyPenalty };

struct LossSpec {
  LossKind kind = LossKind::CrossEntropy;
  double beta = 0.0;  ///< focal exponent or entropy weight
};

std::string to_string(LossKind kind);

/// Rows of `features` with one target per row. Targets are outcomes in {0,1}
/// or, for the calibration loss, soft empirical probabilities.
struct BatchView {
  const FeatureMatrix& features;
  std::span<const std::size_t> rows;
  std::span<const double> targets;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// All losses are batch means. The prediction is clamped to
// [clamp_eps, 1 - clamp_eps] inside the loss; where the clamp is active the
// gradient is that of the clamped objective (zero).

/// -[t log p + (1-t) log(1-p)]
LossGrad ce_loss_grad(const ModelParams& params, const BatchView& batch,
                      double clamp_eps = kDefaultClampEps);
/// (1-p_y)^beta * (-log p_y); targets must be 0/1.
LossGrad focal_loss_grad(const ModelParams& params, const BatchView& batch, double beta,
                         double clamp_eps = kDefaultClampEps);
/// CE - beta * H(p).
LossGrad entropy_penalty_loss_grad(const ModelParams& params, const BatchView& batch,
                                   double beta, double clamp_eps = kDefaultClampEps);
LossGrad loss_grad(const ModelParams& params, const BatchView& batch, const LossSpec& loss,
                   double clamp_eps = kDefaultClampEps);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  Architecture arch = Architecture::mlp(16, 32);
  LossSpec loss;
  double lr = 0.05;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::size_t patience = 10;  ///< epochs without improvement; 0 disables early stopping
  std::uint64_t seed = 0;
  bool resample = false;      ///< redraw training labels from truth every epoch
  double clamp_eps = kDefaultClampEps;
  std::size_t ece_bins = 15;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  ///< validation cross-entropy
  double val_ece = 0.0;
  double val_brier = 0.0;
  std::optional<double> mse_p;  ///< on validation rows, when truth is known
};

struct TrainHistory {
  std::vector<EpochRecord> records;
  std::size_t best_epoch = 0;  ///< epoch whose parameters were returned
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

/// Called after every epoch with the current parameters.
using EpochObserver = std::function<void(std::size_t epoch, const ModelParams& params)>;

/// Mini-batch SGD from a seeded initialization. Returns the parameters of the
/// epoch with the lowest validation cross-entropy (earliest on ties) and stops
/// after `patience` epochs without improvement.
TrainResult train(const LabeledDataset& dataset, const Split& split, const TrainConfig& config,
                  const EpochObserver& observer = {});
/// Same loop, starting from `start` instead of a fresh initialization.
TrainResult continue_training(ModelParams start, const LabeledDataset& dataset,
                              const Split& split, const TrainConfig& config,
                              const EpochObserver& observer = {});

/// Validation statistics used by the training loops.
struct ValidationStats {
  double ce = 0.0;
  double ece = 0.0;
  double brier = 0.0;
  std::optional<double> mse_p;
};
ValidationStats validation_stats(const ModelParams& params, const LabeledDataset& dataset,
                                 std::span<const std::size_t> rows, double clamp_eps,
                                 std::size_t ece_bins);

/// One shuffled pass of mini-batch SGD over `rows`. `targets` is indexed by
/// dataset row. Returns the example-weighted mean loss; throws
/// TrainingDiverged on a non-finite loss or gradient.
double sgd_epoch(ModelParams& params, const FeatureMatrix& features,
                 std::span<const std::size_t> rows, std::span<const double> targets,
                 const LossSpec& loss, double lr, std::size_t batch_size, double clamp_eps,
                 std::uint64_t seed, std::size_t epoch);

// ---------------------------------------------------------------------------
// Ensembles

/// Trains `members` models that differ only in their seed stream.
std::vector<ModelParams> train_ensemble(const LabeledDataset& dataset, const Split& split,
                                        const TrainConfig& config, std::size_t members);
double ensemble_predict(std::span<const ModelParams> models, std::span<const double> x);
PredictionSet predict_set(std::span<const ModelParams> models, const LabeledDataset& dataset,
                          std::span<const std::size_t> rows);

// ---------------------------------------------------------------------------
// Persistence

/// Versioned JSON checkpoint: {"format","version","arch":{...},"weights":[...]}.
std::string model_to_json(const ModelParams& params);
ModelParams model_from_json(const std::string& text);
void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

/// `epoch,train_loss,val_loss,val_ece,val_brier[,mse_p]`
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace probest
