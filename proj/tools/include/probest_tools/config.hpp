#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "probest/cape.hpp"
#include "probest/earlylearn.hpp"
#include "probest/model.hpp"
#include "probest/synthgen.hpp"

namespace probest::tools {

/// Thrown for anything wrong with a user-supplied configuration; the CLI maps
/// it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method {
  CeEarlyStop,
  CeResampled,
  Platt,
  Temperature,
  Focal,
  Entropy,
  DeepEnsemble,
  CapeBin,
  CapeKernel,
  CapeFromScratch,
};

std::string to_string(Method m);
/// Throws ConfigError on unknown names.
Method parse_method(const std::string& name);
/// Every method, in the canonical report order.
std::vector<Method> all_methods();

struct DataConfig {
  enum class Kind { Scenario, Logistic } kind = Kind::Scenario;
  Scenario scenario = Scenario::Linear;
  std::size_t n = 20000;
  std::size_t dim = 16;
  double noise_sd = 0.0;
  double gamma = 1.0;  ///< logistic only
  std::array<double, 3> split{0.7, 0.15, 0.15};
};

struct ExperimentConfig {
  DataConfig data;
  std::size_t hidden = 32;  ///< 0 selects the logistic model
  TrainConfig train;
  CapeConfig cape;
  double focal_beta = 2.0;
  double entropy_beta = 0.1;
  std::size_t ensemble_members = 5;
  std::vector<Method> methods{Method::CeEarlyStop};
  std::size_t bins = 15;
  std::size_t bootstrap = 0;
  std::filesystem::path output = "runs";
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  Architecture architecture() const;
  /// Throws ConfigError.
  void validate() const;
};

struct EarlyLearnConfig {
  TrajectoryConfig trajectory;
  bool with_resampled = true;  ///< also run the resampled-label reference
  std::optional<SweepConfig> sweep;
  std::filesystem::path output = "runs";
  std::uint64_t seed = 0;

  void validate() const;
};

/// Parses a JSON document. Missing keys keep their defaults; unknown keys and
/// ill-typed values raise ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
EarlyLearnConfig earlylearn_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& config);

/// Reads and parses a JSON file; ConfigError on I/O or syntax problems.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace probest::tools
