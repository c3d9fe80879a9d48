#include "probest_tools/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "probest/error.hpp"

namespace probest::tools {
namespace {

using nlohmann::json;

constexpr std::pair<Method, const char*> kMethodNames[] = {
    {Method::CeEarlyStop, "ce_early_stop"},   {Method::CeResampled, "ce_resampled"},
    {Method::Platt, "platt"},                 {Method::Temperature, "temperature"},
    {Method::Focal, "focal"},                 {Method::Entropy, "entropy"},
    {Method::DeepEnsemble, "deep_ensemble"},  {Method::CapeBin, "cape_bin"},
    {Method::CapeKernel, "cape_kernel"},      {Method::CapeFromScratch, "cape_from_scratch"},
};

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(where() + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  void count(const char* key, std::size_t& out) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    if (!it->is_number_integer() || it->get<long long>() < 0) {
      throw ConfigError(where(key) + " must be a non-negative integer");
    }
    out = it->get<std::size_t>();
  }

  void seed(const char* key, std::uint64_t& out) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0)) {
      throw ConfigError(where(key) + " must be a non-negative integer");
    }
    out = it->get<std::uint64_t>();
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return std::nullopt;
    return Section(*it, where(key));
  }

  bool has(const char* key) const { return doc_.contains(key); }
  const json& raw(const char* key) {
    seen_.insert(key);
    return doc_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + where(key.c_str()) + "'");
    }
  }

  std::string where(const char* key = nullptr) const {
    if (!key) return path_.empty() ? std::string("config") : path_;
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

void read_data(Section s, DataConfig& d) {
  std::string kind = d.kind == DataConfig::Kind::Scenario ? "scenario" : "logistic";
  s.get("kind", kind);
  kind = lower(kind);
  if (kind == "scenario") {
    d.kind = DataConfig::Kind::Scenario;
  } else if (kind == "logistic") {
    d.kind = DataConfig::Kind::Logistic;
  } else {
    throw ConfigError("data.kind must be 'scenario' or 'logistic'");
  }
  std::string scenario(to_string(d.scenario));
  s.get("scenario", scenario);
  try {
    d.scenario = parse_scenario(scenario);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("data.scenario: ") + e.what());
  }
  s.count("n", d.n);
  s.count("dim", d.dim);
  s.get("noise_sd", d.noise_sd);
  s.get("gamma", d.gamma);
  s.get("split", d.split);
  s.finish();
}

void read_train(Section s, TrainConfig& t) {
  s.get("lr", t.lr);
  s.count("epochs", t.epochs);
  s.count("batch_size", t.batch_size);
  s.count("patience", t.patience);
  s.get("clamp_eps", t.clamp_eps);
  s.finish();
}

void read_cape(Section s, CapeConfig& c) {
  s.count("m", c.m);
  std::string estimator = std::holds_alternative<BinEstimator>(c.estimator) ? "bin" : "kernel";
  s.get("estimator", estimator);
  BinEstimator bin;
  KernelEstimator kernel;
  s.count("bins", bin.bins);
  s.count("neighbors", kernel.neighbors);
  s.get("sigma", kernel.sigma);
  estimator = lower(estimator);
  if (estimator == "bin") {
    c.estimator = bin;
  } else if (estimator == "kernel") {
    c.estimator = kernel;
  } else {
    throw ConfigError("cape.estimator must be 'bin' or 'kernel'");
  }
  std::string mode = c.mode == CapeMode::Alternating ? "alternating" : "weighted";
  s.get("mode", mode);
  mode = lower(mode);
  if (mode == "alternating") {
    c.mode = CapeMode::Alternating;
  } else if (mode == "weighted") {
    c.mode = CapeMode::Weighted;
  } else {
    throw ConfigError("cape.mode must be 'alternating' or 'weighted'");
  }
  s.get("lambda", c.lambda);
  s.count("epochs", c.epochs);
  s.get("lr", c.lr);
  s.count("batch_size", c.batch_size);
  s.finish();
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& [method, name] : kMethodNames) {
    if (method == m) return name;
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (const auto& [method, label] : kMethodNames) {
    if (name == label) return method;
  }
  throw ConfigError("unknown method '" + name + "'");
}

std::vector<Method> all_methods() {
  std::vector<Method> out;
  for (const auto& [method, name] : kMethodNames) out.push_back(method);
  return out;
}

Architecture ExperimentConfig::architecture() const {
  return hidden == 0 ? Architecture::logistic(data.dim) : Architecture::mlp(data.dim, hidden);
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("at least one method is required");
  if (data.n < 3) throw ConfigError("data.n must be at least 3");
  if (data.dim < 1) throw ConfigError("data.dim must be at least 1");
  if (!(data.noise_sd >= 0.0)) throw ConfigError("data.noise_sd must be non-negative");
  if (!(data.gamma > 0.0)) throw ConfigError("data.gamma must be positive");
  for (double f : data.split) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("data.split fractions must lie in [0,1]");
  }
  if (std::abs(data.split[0] + data.split[1] + data.split[2] - 1.0) > 1e-9) {
    throw ConfigError("data.split fractions must sum to 1");
  }
  if (data.split[0] <= 0.0 || data.split[1] <= 0.0 || data.split[2] <= 0.0) {
    throw ConfigError("data.split needs positive train, validation and test fractions");
  }
  if (bins < 1) throw ConfigError("metrics.bins must be at least 1");
  if (ensemble_members < 1) throw ConfigError("baselines.ensemble_members must be at least 1");
  if (!(focal_beta >= 0.0)) throw ConfigError("baselines.focal_beta must be non-negative");
  if (!(entropy_beta >= 0.0)) throw ConfigError("baselines.entropy_beta must be non-negative");
  try {
    TrainConfig t = train;
    t.arch = architecture();
    t.validate();
    cape.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

void EarlyLearnConfig::validate() const {
  try {
    trajectory.validate();
    if (sweep) sweep->validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig experiment_config_from_json(const json& doc) {
  ExperimentConfig c;
  Section root(doc, "");
  root.seed("seed", c.seed);
  std::string output = c.output.string();
  root.get("output", output);
  c.output = output;
  root.count("threads", c.threads);
  if (auto s = root.child("data")) read_data(*s, c.data);
  if (auto s = root.child("model")) {
    s->count("hidden", c.hidden);
    s->finish();
  }
  if (auto s = root.child("train")) read_train(*s, c.train);
  if (auto s = root.child("cape")) read_cape(*s, c.cape);
  if (auto s = root.child("baselines")) {
    s->get("focal_beta", c.focal_beta);
    s->get("entropy_beta", c.entropy_beta);
    s->count("ensemble_members", c.ensemble_members);
    s->finish();
  }
  if (root.has("methods")) {
    const json& list = root.raw("methods");
    if (!list.is_array()) throw ConfigError("methods must be an array of names");
    c.methods.clear();
    for (const auto& item : list) {
      if (!item.is_string()) throw ConfigError("methods must be an array of names");
      std::string name = item.get<std::string>();
      // deep_ensemble(M) sets the member count inline.
      if (name.rfind("deep_ensemble(", 0) == 0 && name.back() == ')') {
        const std::string digits = name.substr(14, name.size() - 15);
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) {
          throw ConfigError("malformed method '" + name + "'");
        }
        c.ensemble_members = std::stoul(digits);
        name = "deep_ensemble";
      }
      const Method m = parse_method(name);
      if (std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end()) {
        throw ConfigError("method '" + name + "' listed twice");
      }
      c.methods.push_back(m);
    }
  }
  if (auto s = root.child("metrics")) {
    s->count("bins", c.bins);
    s->count("bootstrap", c.bootstrap);
    s->finish();
  }
  root.finish();
  c.validate();
  return c;
}

EarlyLearnConfig earlylearn_config_from_json(const json& doc) {
  EarlyLearnConfig c;
  Section root(doc, "");
  root.seed("seed", c.seed);
  std::string output = c.output.string();
  root.get("output", output);
  c.output = output;
  if (auto s = root.child("trajectory")) {
    auto& t = c.trajectory;
    s->count("n", t.n);
    s->count("dim", t.dim);
    s->get("gamma", t.gamma);
    s->get("gamma0", t.gamma0);
    s->get("eta", t.eta);
    s->count("steps", t.steps);
    s->count("eval_every", t.eval_every);
    s->count("holdout", t.holdout);
    s->get("collapse_tol", t.collapse_tol);
    s->get("resampled", c.with_resampled);
    s->finish();
  }
  if (auto s = root.child("sweep")) {
    SweepConfig w;
    s->get("kappas", w.kappas);
    s->count("n", w.n);
    s->get("gamma", w.gamma);
    s->get("gamma0", w.gamma0);
    s->count("trials", w.trials);
    s->count("steps", w.steps);
    s->get("eta", w.eta);
    s->get("collapse_tol", w.collapse_tol);
    s->count("threads", w.threads);
    s->finish();
    c.sweep = w;
  }
  root.finish();
  c.trajectory.seed = c.seed;
  if (c.sweep) c.sweep->seed = c.seed;
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  json cape = {{"m", c.cape.m},
               {"mode", c.cape.mode == CapeMode::Alternating ? "alternating" : "weighted"},
               {"lambda", c.cape.lambda},
               {"epochs", c.cape.epochs},
               {"lr", c.cape.lr},
               {"batch_size", c.cape.batch_size}};
  if (const auto* b = std::get_if<BinEstimator>(&c.cape.estimator)) {
    cape["estimator"] = "bin";
    cape["bins"] = b->bins;
  } else {
    const auto& k = std::get<KernelEstimator>(c.cape.estimator);
    cape["estimator"] = "kernel";
    cape["neighbors"] = k.neighbors;
    cape["sigma"] = k.sigma;
  }
  return {
      {"seed", c.seed},
      {"output", c.output.string()},
      {"threads", c.threads},
      {"data",
       {{"kind", c.data.kind == DataConfig::Kind::Scenario ? "scenario" : "logistic"},
        {"scenario", std::string(to_string(c.data.scenario))},
        {"n", c.data.n},
        {"dim", c.data.dim},
        {"noise_sd", c.data.noise_sd},
        {"gamma", c.data.gamma},
        {"split", c.data.split}}},
      {"model", {{"hidden", c.hidden}}},
      {"train",
       {{"lr", c.train.lr},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"patience", c.train.patience},
        {"clamp_eps", c.train.clamp_eps}}},
      {"cape", cape},
      {"baselines",
       {{"focal_beta", c.focal_beta},
        {"entropy_beta", c.entropy_beta},
        {"ensemble_members", c.ensemble_members}}},
      {"methods", methods},
      {"metrics", {{"bins", c.bins}, {"bootstrap", c.bootstrap}}},
  };
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace probest::tools
