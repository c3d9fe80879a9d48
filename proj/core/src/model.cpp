#include "probest/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "probest/error.hpp"
#include "probest/metrics.hpp"
#include "probest/rng.hpp"
#include "probest/synthgen.hpp"

namespace probest {
namespace {

constexpr const char* kCheckpointFormat = "probest-model";
constexpr int kCheckpointVersion = 1;

// log(1 + e^t) without overflow.
double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

void check_width(const ModelParams& params, std::size_t width) {
  if (width != params.arch().input_dim) {
    throw InvalidArgument("input width " + std::to_string(width) +
                          " does not match model input dimension " +
                          std::to_string(params.arch().input_dim));
  }
}

// Per-example loss and its derivative with respect to the logit.
struct PointLoss {
  double loss;
  double dlogit;
};

// Clamped prediction: returns true when the clamp is active.
bool clamp_active(double p, double eps) { return p < eps || p > 1.0 - eps; }

PointLoss ce_point(double z, double t, double eps) {
  const double p = sigmoid(z);
  if (clamp_active(p, eps)) {
    const double pc = std::clamp(p, eps, 1.0 - eps);
    return {-(t * std::log(pc) + (1.0 - t) * std::log1p(-pc)), 0.0};
  }
  // log p = -softplus(-z), log(1-p) = -softplus(z)
  return {t * softplus(-z) + (1.0 - t) * softplus(z), p - t};
}

PointLoss focal_point(double z, double t, double beta, double eps) {
  if (t != 0.0 && t != 1.0) throw InvalidArgument("focal loss needs 0/1 targets");
  const double p = sigmoid(z);
  const double sign = t == 1.0 ? 1.0 : -1.0;
  if (clamp_active(p, eps)) {
    const double pc = std::clamp(p, eps, 1.0 - eps);
    const double py = t == 1.0 ? pc : 1.0 - pc;
    return {std::pow(1.0 - py, beta) * -std::log(py), 0.0};
  }
  const double log_py = t == 1.0 ? -softplus(-z) : -softplus(z);
  const double py = t == 1.0 ? p : 1.0 - p;
  const double qy = t == 1.0 ? sigmoid(-z) : p;  // 1 - p_y
  const double w = std::pow(qy, beta);
  // d/dz of (1-p_y)^beta * (-log p_y), using dp_y/dz = sign * p_y (1-p_y).
  const double d = sign * (beta * w * py * log_py - w * qy);
  return {w * -log_py, d};
}

PointLoss entropy_point(double z, double t, double beta, double eps) {
  const double p = sigmoid(z);
  if (clamp_active(p, eps)) {
    const double pc = std::clamp(p, eps, 1.0 - eps);
    const double h = -pc * std::log(pc) - (1.0 - pc) * std::log1p(-pc);
    return {-(t * std::log(pc) + (1.0 - t) * std::log1p(-pc)) - beta * h, 0.0};
  }
  const double log_p = -softplus(-z);
  const double log_q = -softplus(z);
  const double ce = -(t * log_p + (1.0 - t) * log_q);
  const double h = -p * log_p - (1.0 - p) * log_q;
  // dH/dz = p(1-p) log((1-p)/p) = -z p(1-p)
  return {ce - beta * h, (p - t) + beta * p * (1.0 - p) * z};
}

// Forward pass that keeps hidden pre-activations for backprop.
struct MlpCache {
  std::vector<double> pre;
};

double mlp_logit(const Architecture& a, std::span<const double> w, const double* x,
                 MlpCache* cache) {
  const std::size_t d = a.input_dim;
  const std::size_t h = a.hidden;
  const double* w1 = w.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double b2 = w2[h];
  double z = b2;
  for (std::size_t j = 0; j < h; ++j) {
    const double* row = w1 + j * d;
    double s = b1[j];
    for (std::size_t k = 0; k < d; ++k) s += row[k] * x[k];
    if (cache) cache->pre[j] = s;
    if (s > 0.0) z += w2[j] * s;
  }
  return z;
}

double logistic_logit(std::span<const double> w, const double* x) {
  double z = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) z += w[k] * x[k];
  return z;
}

// Accumulates dlogit * d(logit)/d(weights) into grad.
void backprop(const Architecture& a, std::span<const double> w, const double* x,
              const MlpCache& cache, double dlogit, std::vector<double>& grad) {
  if (dlogit == 0.0) return;
  if (a.kind == ArchKind::Logistic) {
    for (std::size_t k = 0; k < a.input_dim; ++k) grad[k] += dlogit * x[k];
    return;
  }
  const std::size_t d = a.input_dim;
  const std::size_t h = a.hidden;
  const double* w2 = w.data() + h * d + h;
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + h * d;
  double* g_w2 = g_b1 + h;
  double* g_b2 = g_w2 + h;
  *g_b2 += dlogit;
  for (std::size_t j = 0; j < h; ++j) {
    const double pre = cache.pre[j];
    if (pre <= 0.0) continue;
    g_w2[j] += dlogit * pre;
    const double back = dlogit * w2[j];
    g_b1[j] += back;
    double* row = g_w1 + j * d;
    for (std::size_t k = 0; k < d; ++k) row[k] += back * x[k];
  }
}

template <class PointFn>
LossGrad batch_loss_grad(const ModelParams& params, const BatchView& batch, PointFn&& point) {
  if (batch.rows.empty()) throw InvalidArgument("empty batch");
  if (batch.targets.size() != batch.rows.size()) {
    throw InvalidArgument("batch targets and rows differ in length");
  }
  check_width(params, static_cast<std::size_t>(batch.features.cols()));
  const Architecture& a = params.arch();
  const auto w = params.weights();
  LossGrad out;
  out.grad.assign(w.size(), 0.0);
  MlpCache cache;
  cache.pre.resize(a.hidden);
  for (std::size_t k = 0; k < batch.rows.size(); ++k) {
    const std::size_t row = batch.rows[k];
    const double* x = batch.features.data() + row * a.input_dim;
    const double z = a.kind == ArchKind::Logistic ? logistic_logit(w, x)
                                                  : mlp_logit(a, w, x, &cache);
    const PointLoss pl = point(z, batch.targets[k]);
    out.loss += pl.loss;
    backprop(a, w, x, cache, pl.dlogit, out.grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.rows.size());
  out.loss *= inv;
  for (double& g : out.grad) g *= inv;
  return out;
}

void check_clamp(double eps) {
  if (!(eps > 0.0 && eps <= 0.1)) throw InvalidArgument("clamp_eps must lie in (0, 0.1]");
}

}  // namespace

Architecture Architecture::logistic(std::size_t input_dim) {
  return {ArchKind::Logistic, input_dim, 0};
}

Architecture Architecture::mlp(std::size_t input_dim, std::size_t hidden) {
  return {ArchKind::Mlp, input_dim, hidden};
}

std::size_t Architecture::param_count() const noexcept {
  if (kind == ArchKind::Logistic) return input_dim;
  return hidden * input_dim + hidden + hidden + 1;
}

ModelParams::ModelParams(Architecture arch, std::vector<double> weights)
    : arch_(arch), weights_(std::move(weights)) {
  if (arch_.input_dim < 1) throw InvalidArgument("input dimension must be >= 1");
  if (arch_.kind == ArchKind::Mlp && arch_.hidden < 1) {
    throw InvalidArgument("MLP hidden width must be >= 1");
  }
  if (weights_.size() != arch_.param_count()) {
    throw InvalidArgument("expected " + std::to_string(arch_.param_count()) +
                          " weights, got " + std::to_string(weights_.size()));
  }
  for (double v : weights_) {
    if (!std::isfinite(v)) throw InvalidArgument("weights must be finite");
  }
}

ModelParams ModelParams::zeros(Architecture arch) {
  return ModelParams(arch, std::vector<double>(arch.param_count(), 0.0));
}

ModelParams initialize(const Architecture& arch, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "init");
  std::vector<double> w(arch.param_count(), 0.0);
  const double sd_in = 1.0 / std::sqrt(static_cast<double>(arch.input_dim));
  if (arch.kind == ArchKind::Logistic) {
    for (double& v : w) v = sd_in * rng.normal();
  } else {
    const std::size_t d = arch.input_dim;
    const std::size_t h = arch.hidden;
    const double sd_hidden = 1.0 / std::sqrt(static_cast<double>(h));
    for (std::size_t i = 0; i < h * d; ++i) w[i] = sd_in * rng.normal();
    for (std::size_t j = 0; j < h; ++j) w[h * d + h + j] = sd_hidden * rng.normal();
  }
  return ModelParams(arch, std::move(w));
}

ModelParams initialize_on_sphere(const Architecture& arch, double radius, std::uint64_t seed) {
  if (arch.kind != ArchKind::Logistic) {
    throw InvalidArgument("sphere initialization applies to logistic models");
  }
  Rng rng = Rng::stream(seed, "init/sphere");
  std::vector<double> w(arch.param_count());
  double sq = 0.0;
  do {
    sq = 0.0;
    for (double& v : w) {
      v = rng.normal();
      sq += v * v;
    }
  } while (sq == 0.0);
  const double scale = radius / std::sqrt(sq);
  for (double& v : w) v *= scale;
  return ModelParams(arch, std::move(w));
}

double logit(const ModelParams& params, std::span<const double> x) {
  check_width(params, x.size());
  if (params.arch().kind == ArchKind::Logistic) return logistic_logit(params.weights(), x.data());
  return mlp_logit(params.arch(), params.weights(), x.data(), nullptr);
}

double forward(const ModelParams& params, std::span<const double> x) {
  return sigmoid(logit(params, x));
}

std::vector<double> predict(const ModelParams& params, const FeatureMatrix& features,
                            std::span<const std::size_t> rows) {
  check_width(params, static_cast<std::size_t>(features.cols()));
  const std::size_t d = params.arch().input_dim;
  std::vector<double> out(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out[k] = forward(params, {features.data() + rows[k] * d, d});
  }
  return out;
}

PredictionSet predict_set(const ModelParams& params, const LabeledDataset& dataset,
                          std::span<const std::size_t> rows) {
  PredictionSet pred;
  pred.probs = predict(params, dataset.features(), rows);
  pred.outcomes.reserve(rows.size());
  for (std::size_t r : rows) pred.outcomes.push_back(dataset.outcomes()[r]);
  if (dataset.has_truth()) {
    pred.truth.emplace();
    pred.truth->reserve(rows.size());
    for (std::size_t r : rows) pred.truth->push_back(dataset.truth_probs()[r]);
  }
  return pred;
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::CrossEntropy: return "ce";
    case LossKind::Focal: return "focal";
    case LossKind::EntropyPenalty: return "entropy";
  }
  return "unknown";
}

LossGrad ce_loss_grad(const ModelParams& params, const BatchView& batch, double clamp_eps) {
  check_clamp(clamp_eps);
  return batch_loss_grad(params, batch,
                         [&](double z, double t) { return ce_point(z, t, clamp_eps); });
}

LossGrad focal_loss_grad(const ModelParams& params, const BatchView& batch, double beta,
                         double clamp_eps) {
  check_clamp(clamp_eps);
  if (!(beta >= 0.0)) throw InvalidArgument("focal beta must be >= 0");
  return batch_loss_grad(params, batch,
                         [&](double z, double t) { return focal_point(z, t, beta, clamp_eps); });
}

LossGrad entropy_penalty_loss_grad(const ModelParams& params, const BatchView& batch,
                                   double beta, double clamp_eps) {
  check_clamp(clamp_eps);
  if (!(beta >= 0.0)) throw InvalidArgument("entropy penalty beta must be >= 0");
  return batch_loss_grad(
      params, batch, [&](double z, double t) { return entropy_point(z, t, beta, clamp_eps); });
}

LossGrad loss_grad(const ModelParams& params, const BatchView& batch, const LossSpec& loss,
                   double clamp_eps) {
  switch (loss.kind) {
    case LossKind::CrossEntropy: return ce_loss_grad(params, batch, clamp_eps);
    case LossKind::Focal: return focal_loss_grad(params, batch, loss.beta, clamp_eps);
    case LossKind::EntropyPenalty:
      return entropy_penalty_loss_grad(params, batch, loss.beta, clamp_eps);
  }
  throw InvalidArgument("unknown loss kind");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  check_clamp(clamp_eps);
  if (!(loss.beta >= 0.0)) throw InvalidArgument("loss beta must be >= 0");
  if (ece_bins < 1) throw InvalidArgument("ece_bins must be >= 1");
}

ValidationStats validation_stats(const ModelParams& params, const LabeledDataset& dataset,
                                 std::span<const std::size_t> rows, double clamp_eps,
                                 std::size_t ece_bins) {
  ValidationStats s;
  const PredictionSet pred = predict_set(params, dataset, rows);
  double ce = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double p = std::clamp(pred.probs[k], clamp_eps, 1.0 - clamp_eps);
    ce -= pred.outcomes[k] == 1 ? std::log(p) : std::log1p(-p);
  }
  s.ce = ce / static_cast<double>(pred.size());
  s.ece = ece(pred, std::min(ece_bins, pred.size()));
  s.brier = brier(pred);
  if (pred.truth) s.mse_p = mse_p(pred.probs, *pred.truth);
  return s;
}

double sgd_epoch(ModelParams& params, const FeatureMatrix& features,
                 std::span<const std::size_t> rows, std::span<const double> targets,
                 const LossSpec& loss, double lr, std::size_t batch_size, double clamp_eps,
                 std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(rows.begin(), rows.end());
  Rng rng = Rng::stream(seed, "shuffle", epoch);
  rng.shuffle(order.begin(), order.end());

  std::vector<double> batch_targets;
  batch_targets.reserve(batch_size);
  double total = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    const std::span<const std::size_t> batch_rows(order.data() + start, len);
    batch_targets.clear();
    for (std::size_t r : batch_rows) batch_targets.push_back(targets[r]);
    LossGrad lg = loss_grad(params, {features, batch_rows, batch_targets}, loss, clamp_eps);
    bool finite = std::isfinite(lg.loss);
    for (double g : lg.grad) finite = finite && std::isfinite(g);
    if (!finite) {
      throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index),
                             epoch, batch_index);
    }
    auto w = params.weights();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * lg.grad[i];
    total += lg.loss * static_cast<double>(len);
  }
  return total / static_cast<double>(order.size());
}

TrainResult continue_training(ModelParams start, const LabeledDataset& dataset,
                              const Split& split, const TrainConfig& config,
                              const EpochObserver& observer) {
  config.validate();
  if (split.train.empty() || split.val.empty()) {
    throw InvalidArgument("training needs non-empty train and validation parts");
  }
  if (config.resample && !dataset.has_truth()) {
    throw InvalidState("label resampling requires ground-truth probabilities");
  }
  if (start.arch().input_dim != dataset.dim()) {
    throw InvalidArgument("model input dimension does not match dataset");
  }

  std::vector<double> targets(dataset.outcomes().begin(), dataset.outcomes().end());
  ModelParams params = std::move(start);
  ModelParams best = params;
  TrainHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.resample) {
      const auto y = resample_outcomes(dataset, epoch, config.seed);
      std::copy(y.begin(), y.end(), targets.begin());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = sgd_epoch(params, dataset.features(), split.train, targets, config.loss,
                               config.lr, config.batch_size, config.clamp_eps, config.seed,
                               epoch);
    const auto v = validation_stats(params, dataset, split.val, config.clamp_eps,
                                    config.ece_bins);
    rec.val_loss = v.ce;
    rec.val_ece = v.ece;
    rec.val_brier = v.brier;
    rec.mse_p = v.mse_p;
    history.records.push_back(rec);
    if (observer) observer(epoch, params);

    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best = params;
      history.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return {std::move(best), std::move(history)};
}

TrainResult train(const LabeledDataset& dataset, const Split& split, const TrainConfig& config,
                  const EpochObserver& observer) {
  if (config.arch.input_dim != dataset.dim()) {
    throw InvalidArgument("architecture input dimension does not match dataset");
  }
  return continue_training(initialize(config.arch, config.seed), dataset, split, config,
                           observer);
}

std::vector<ModelParams> train_ensemble(const LabeledDataset& dataset, const Split& split,
                                        const TrainConfig& config, std::size_t members) {
  if (members < 1) throw InvalidArgument("ensemble needs at least one member");
  std::vector<ModelParams> models;
  models.reserve(members);
  for (std::size_t j = 0; j < members; ++j) {
    TrainConfig member = config;
    member.seed = Rng::stream(config.seed, "ensemble", j).next();
    models.push_back(train(dataset, split, member).params);
  }
  return models;
}

double ensemble_predict(std::span<const ModelParams> models, std::span<const double> x) {
  if (models.empty()) throw InvalidArgument("ensemble_predict needs at least one model");
  double total = 0.0;
  for (const auto& m : models) {
    if (!(m.arch() == models.front().arch())) {
      throw InvalidArgument("ensemble members must share an architecture");
    }
    total += forward(m, x);
  }
  return total / static_cast<double>(models.size());
}

PredictionSet predict_set(std::span<const ModelParams> models, const LabeledDataset& dataset,
                          std::span<const std::size_t> rows) {
  if (models.empty()) throw InvalidArgument("ensemble needs at least one model");
  PredictionSet pred = predict_set(models.front(), dataset, rows);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    pred.probs[k] = ensemble_predict(models, dataset.row(rows[k]));
  }
  return pred;
}

std::string model_to_json(const ModelParams& params) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  const auto& a = params.arch();
  j["arch"] = {{"kind", a.kind == ArchKind::Logistic ? "logistic" : "mlp"},
               {"input_dim", a.input_dim},
               {"hidden", a.hidden}};
  j["weights"] = std::vector<double>(params.weights().begin(), params.weights().end());
  return j.dump();
}

ModelParams model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw InvalidArgument("not a probest model checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw InvalidArgument("unsupported checkpoint version");
    }
    const auto& ja = j.at("arch");
    const std::string kind = ja.at("kind").get<std::string>();
    Architecture a;
    if (kind == "logistic") {
      a = Architecture::logistic(ja.at("input_dim").get<std::size_t>());
    } else if (kind == "mlp") {
      a = Architecture::mlp(ja.at("input_dim").get<std::size_t>(),
                            ja.at("hidden").get<std::size_t>());
    } else {
      throw InvalidArgument("unknown architecture '" + kind + "'");
    }
    return ModelParams(a, j.at("weights").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << model_to_json(params) << '\n';
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  const bool with_msep = std::any_of(history.records.begin(), history.records.end(),
                                     [](const EpochRecord& r) { return r.mse_p.has_value(); });
  out << "epoch,train_loss,val_loss,val_ece,val_brier" << (with_msep ? ",mse_p" : "") << '\n';
  for (const auto& r : history.records) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss)
        << ',' << format_double(r.val_ece) << ',' << format_double(r.val_brier);
    if (with_msep) {
      out << ',';
      if (r.mse_p) out << format_double(*r.mse_p);
    }
    out << '\n';
  }
}

}  // namespace probest
