#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "probest/cape.hpp"
#include "probest/data.hpp"
#include "probest/error.hpp"
#include "probest/metrics.hpp"
#include "probest/model.hpp"
#include "probest/recal.hpp"
#include "probest_tools/config.hpp"
#include "probest_tools/runner.hpp"
#include "probest_tools/svg.hpp"

namespace fs = std::filesystem;
using namespace probest;
using namespace probest::tools;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

nlohmann::json load_config_doc(const Globals& g) {
  if (g.config.empty()) return nlohmann::json::object();
  return read_json_file(g.config);
}

ExperimentConfig experiment_config(const Globals& g) {
  ExperimentConfig c = experiment_config_from_json(load_config_doc(g));
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.output = g.out;
  return c;
}

fs::path plain_out(const Globals& g) {
  fs::path dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
  fs::create_directories(dir);
  return dir;
}

Split split_for(const ExperimentConfig& c, const LabeledDataset& data) {
  return split(data, c.data.split, derive_seed(c.seed, "split"));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text << '\n';
}

LossSpec parse_loss(const std::string& name, double beta) {
  if (name == "ce") return {LossKind::CrossEntropy, 0.0};
  if (name == "focal") return {LossKind::Focal, beta};
  if (name == "entropy") return {LossKind::EntropyPenalty, beta};
  throw ConfigError("unknown loss '" + name + "' (expected ce, focal or entropy)");
}

TrainConfig train_config_for(const ExperimentConfig& c, std::size_t dim) {
  TrainConfig t = c.train;
  t.arch = c.hidden == 0 ? Architecture::logistic(dim) : Architecture::mlp(dim, c.hidden);
  t.seed = derive_seed(c.seed, "method/ce");
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probest: probability estimation experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output directory");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset (dataset.csv)");
  std::string gen_kind, gen_scenario;
  std::optional<std::size_t> gen_n, gen_dim;
  std::optional<double> gen_noise, gen_gamma;
  gen->add_option("--kind", gen_kind, "scenario or logistic");
  gen->add_option("--scenario", gen_scenario, "linear, sigmoid, skewed, centered, discrete");
  gen->add_option("--n", gen_n, "number of examples");
  gen->add_option("--dim", gen_dim, "feature dimension");
  gen->add_option("--noise-sd", gen_noise, "noise on the informative feature");
  gen->add_option("--gamma", gen_gamma, "norm of the true parameter (logistic)");

  // train
  auto* trn = app.add_subcommand("train", "train a model with early stopping");
  std::string train_data, train_loss = "ce";
  double train_beta = 0.0;
  bool train_resample = false;
  trn->add_option("--data", train_data, "dataset CSV")->required();
  trn->add_option("--loss", train_loss, "ce, focal or entropy");
  trn->add_option("--beta", train_beta, "focal exponent or entropy weight");
  trn->add_flag("--resample", train_resample, "redraw labels from truth every epoch");

  // cape
  auto* cp = app.add_subcommand("cape", "CaPE fine-tuning (or from scratch)");
  std::string cape_data, cape_model, cape_estimator;
  bool cape_scratch = false;
  cp->add_option("--data", cape_data, "dataset CSV")->required();
  cp->add_option("--model", cape_model, "warm-start model JSON (default: train one)");
  cp->add_option("--estimator", cape_estimator, "bin or kernel");
  cp->add_flag("--from-scratch", cape_scratch, "start from a random initialization");

  // recal
  auto* rc = app.add_subcommand("recal", "fit Platt or temperature scaling");
  std::string recal_val, recal_apply, recal_method = "platt";
  rc->add_option("--val", recal_val, "validation predictions CSV")->required();
  rc->add_option("--apply", recal_apply, "predictions CSV to recalibrate");
  rc->add_option("--method", recal_method, "platt or temperature");

  // eval
  auto* ev = app.add_subcommand("eval", "metrics and reliability diagram for a prediction file");
  std::string eval_pred, eval_name = "predictions";
  std::size_t eval_bins = kDefaultReportBins;
  ev->add_option("--predictions", eval_pred, "predictions CSV")->required();
  ev->add_option("--bins", eval_bins, "number of quantile bins");
  ev->add_option("--name", eval_name, "label used in outputs");

  auto* el = app.add_subcommand("earlylearn", "gradient-descent trajectories and kappa sweep");
  auto* cm = app.add_subcommand("compare-metrics", "correlate metrics with MSE_p across methods");
  std::string compare_data;
  cm->add_option("--data", compare_data, "dataset CSV instead of generated data");
  auto* rp = app.add_subcommand("report", "full experiment: metrics.csv and reliability plots");
  std::string report_data;
  rp->add_option("--data", report_data, "dataset CSV instead of generated data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      ExperimentConfig c = experiment_config(g);
      if (!gen_kind.empty()) {
        if (gen_kind == "scenario") {
          c.data.kind = DataConfig::Kind::Scenario;
        } else if (gen_kind == "logistic") {
          c.data.kind = DataConfig::Kind::Logistic;
        } else {
          throw ConfigError("--kind must be scenario or logistic");
        }
      }
      if (!gen_scenario.empty()) c.data.scenario = parse_scenario(gen_scenario);
      if (gen_n) c.data.n = *gen_n;
      if (gen_dim) c.data.dim = *gen_dim;
      if (gen_noise) c.data.noise_sd = *gen_noise;
      if (gen_gamma) c.data.gamma = *gen_gamma;
      c.validate();
      const auto data = make_dataset(c.data, derive_seed(c.seed, "data"));
      const auto path = plain_out(g) / "dataset.csv";
      save_dataset(data, path);
      std::cout << path.string() << '\n';
    } else if (trn->parsed()) {
      ExperimentConfig c = experiment_config(g);
      const auto data = load_dataset(train_data);
      TrainConfig t = train_config_for(c, data.dim());
      t.loss = parse_loss(train_loss, train_beta);
      t.resample = train_resample;
      if (train_resample && !data.has_truth()) {
        throw ConfigError("--resample needs a truth_prob column in the dataset");
      }
      const auto parts = split_for(c, data);
      const auto result = train(data, parts, t);
      const auto dir = plain_out(g);
      save_model(result.params, dir / "model.json");
      write_history_csv(result.history, dir / "history.csv");
      save_predictions(predict_set(result.params, data, parts.val), dir / "val_predictions.csv");
      save_predictions(predict_set(result.params, data, parts.test), dir / "test_predictions.csv");
      std::cout << "best epoch " << result.history.best_epoch << " of "
                << result.history.records.size() << '\n';
    } else if (cp->parsed()) {
      ExperimentConfig c = experiment_config(g);
      const auto data = load_dataset(cape_data);
      TrainConfig t = train_config_for(c, data.dim());
      CapeConfig cc = c.cape;
      cc.clamp_eps = t.clamp_eps;
      if (cape_estimator == "bin") {
        cc.estimator = BinEstimator{};
      } else if (cape_estimator == "kernel") {
        cc.estimator = KernelEstimator{};
      } else if (!cape_estimator.empty()) {
        throw ConfigError("--estimator must be bin or kernel");
      }
      const auto parts = split_for(c, data);
      CapeResult result = [&] {
        if (cape_scratch) {
          cc.seed = derive_seed(c.seed, "method/cape_from_scratch");
          return cape_from_scratch(t.arch, data, parts, cc);
        }
        cc.seed = derive_seed(c.seed, "method/cape");
        ModelParams warm = cape_model.empty() ? train(data, parts, t).params : load_model(cape_model);
        return cape_train(std::move(warm), data, parts, cc);
      }();
      const auto dir = plain_out(g);
      save_model(result.params, dir / "model.json");
      write_cape_history_csv(result.history, dir / "cape_history.csv");
      save_predictions(predict_set(result.params, data, parts.test), dir / "test_predictions.csv");
      std::cout << "best epoch " << result.history.history.best_epoch << '\n';
    } else if (rc->parsed()) {
      const auto val = load_predictions(recal_val);
      const auto target = recal_apply.empty() ? val : load_predictions(recal_apply);
      PredictionSet out = target;
      std::string params;
      if (recal_method == "platt") {
        const auto p = platt_fit(val.probs, val.outcomes);
        out.probs = platt_apply(p, target.probs);
        params = to_json(p);
      } else if (recal_method == "temperature") {
        const auto p = temperature_fit(val.probs, val.outcomes);
        out.probs = temperature_apply(p, target.probs);
        params = to_json(p);
      } else {
        throw ConfigError("--method must be platt or temperature");
      }
      const auto dir = plain_out(g);
      write_text(dir / ("recal_" + recal_method + ".json"), params);
      save_predictions(out, dir / "recalibrated_predictions.csv");
      std::cout << params << '\n';
    } else if (ev->parsed()) {
      if (eval_bins < 1) throw ConfigError("--bins must be at least 1");
      const auto pred = load_predictions(eval_pred);
      ExperimentResult r;
      r.seed = g.seed.value_or(0);
      const std::size_t bins = std::min(eval_bins, pred.size());
      MethodResult m{Method::CeEarlyStop, pred, evaluate(pred, bins), reliability_curve(pred, bins),
                     {}};
      const auto dir = plain_out(g);
      {
        std::ofstream out(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write metrics.csv");
        out << "method," << metric_csv_header() << '\n'
            << eval_name << ',' << metric_csv_row(m.report) << '\n';
      }
      write_reliability_csv(m.curve, dir / ("reliability_" + eval_name + ".csv"));
      render_reliability_svg(m.curve, dir / ("reliability_" + eval_name + ".svg"), eval_name);
      std::cout << metric_csv_header() << '\n' << metric_csv_row(m.report) << '\n';
    } else if (el->parsed()) {
      EarlyLearnConfig c = earlylearn_config_from_json(load_config_doc(g));
      if (g.seed) {
        c.seed = *g.seed;
        c.trajectory.seed = *g.seed;
        if (c.sweep) c.sweep->seed = *g.seed;
      }
      if (!g.out.empty()) c.output = g.out;
      std::cout << run_earlylearn(c).string() << '\n';
    } else if (cm->parsed() || rp->parsed()) {
      ExperimentConfig c = experiment_config(g);
      const std::string& data_path = cm->parsed() ? compare_data : report_data;
      std::optional<LabeledDataset> data;
      if (!data_path.empty()) {
        data = load_dataset(data_path);
        c.data.dim = data->dim();
        c.data.n = data->size();
      }
      const auto dir = cm->parsed() ? run_metric_comparison(c, data) : run_experiment(c, data);
      std::cout << dir.string() << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const MethodFailure& e) {
    std::cerr << "error in method " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
