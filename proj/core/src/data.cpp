#include "probest/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>

#include "probest/error.hpp"
#include "probest/rng.hpp"

namespace probest {
namespace {

bool in_unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

double parse_double(std::string_view field, std::size_t line_no) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ": not a number: '" +
                         std::string(field) + "'",
                     line_no);
  }
  return v;
}

int parse_outcome(std::string_view field, std::size_t line_no) {
  const double v = parse_double(field, line_no);
  if (v != 0.0 && v != 1.0) {
    throw ParseError("line " + std::to_string(line_no) +
                         ": outcome must be 0 or 1, got '" + std::string(trim(field)) + "'",
                     line_no);
  }
  return static_cast<int>(v);
}

double parse_prob(std::string_view field, std::size_t line_no, std::string_view what) {
  const double v = parse_double(field, line_no);
  if (!in_unit_interval(v)) {
    throw ParseError("line " + std::to_string(line_no) + ": " + std::string(what) +
                         " outside [0,1]: '" + std::string(trim(field)) + "'",
                     line_no);
  }
  return v;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

LabeledDataset::LabeledDataset(FeatureMatrix features, std::vector<int> outcomes,
                               std::optional<std::vector<double>> truth_probs,
                               std::optional<std::vector<double>> latent)
    : features_(std::move(features)),
      outcomes_(std::move(outcomes)),
      truth_probs_(std::move(truth_probs)),
      latent_(std::move(latent)) {
  const auto n = outcomes_.size();
  if (n == 0) throw InvalidArgument("dataset must contain at least one example");
  if (features_.cols() < 1) throw InvalidArgument("feature width must be at least 1");
  if (static_cast<std::size_t>(features_.rows()) != n) {
    throw InvalidArgument("feature rows (" + std::to_string(features_.rows()) +
                          ") != outcomes (" + std::to_string(n) + ")");
  }
  for (int y : outcomes_) {
    if (y != 0 && y != 1) throw InvalidArgument("outcomes must be 0 or 1");
  }
  if (truth_probs_) {
    if (truth_probs_->size() != n) throw InvalidArgument("truth_probs length mismatch");
    if (!std::all_of(truth_probs_->begin(), truth_probs_->end(), in_unit_interval)) {
      throw InvalidArgument("truth_probs must lie in [0,1]");
    }
  }
  if (latent_ && latent_->size() != n) throw InvalidArgument("latent length mismatch");
}

std::span<const double> LabeledDataset::truth_probs() const {
  if (!truth_probs_) throw InvalidState("dataset has no ground-truth probabilities");
  return *truth_probs_;
}

std::span<const double> LabeledDataset::latent() const {
  if (!latent_) throw InvalidState("dataset has no latent values");
  return *latent_;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  FeatureMatrix x(static_cast<Eigen::Index>(indices.size()), features_.cols());
  std::vector<int> y(indices.size());
  std::optional<std::vector<double>> truth;
  std::optional<std::vector<double>> lat;
  if (truth_probs_) truth.emplace(indices.size());
  if (latent_) lat.emplace(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) throw InvalidArgument("subset index out of range");
    x.row(static_cast<Eigen::Index>(k)) = features_.row(static_cast<Eigen::Index>(i));
    y[k] = outcomes_[i];
    if (truth) (*truth)[k] = (*truth_probs_)[i];
    if (lat) (*lat)[k] = (*latent_)[i];
  }
  return LabeledDataset(std::move(x), std::move(y), std::move(truth), std::move(lat));
}

LabeledDataset LabeledDataset::with_outcomes(std::vector<int> outcomes) const {
  return LabeledDataset(features_, std::move(outcomes), truth_probs_, latent_);
}

void PredictionSet::validate() const {
  if (probs.size() != outcomes.size()) {
    throw InvalidArgument("probs and outcomes differ in length");
  }
  if (!std::all_of(probs.begin(), probs.end(), in_unit_interval)) {
    throw InvalidArgument("predicted probabilities must lie in [0,1]");
  }
  for (int y : outcomes) {
    if (y != 0 && y != 1) throw InvalidArgument("outcomes must be 0 or 1");
  }
  if (truth) {
    if (truth->size() != probs.size()) throw InvalidArgument("truth length mismatch");
    if (!std::all_of(truth->begin(), truth->end(), in_unit_interval)) {
      throw InvalidArgument("truth probabilities must lie in [0,1]");
    }
  }
}

Split split(std::size_t n, std::array<double, 3> fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw InvalidArgument("split fractions must lie in [0,1]");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("split fractions must sum to 1");
  std::size_t positive = 0;
  for (double f : fractions) positive += f > 0.0 ? 1 : 0;
  if (n < positive || n == 0) {
    throw InvalidArgument("too few examples (" + std::to_string(n) + ") for split");
  }

  auto part_size = [n](double f) -> std::size_t {
    if (f <= 0.0) return 0;
    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    const auto k = static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
    return std::max<std::size_t>(k, 1);
  };
  const std::size_t n_val = part_size(fractions[1]);
  const std::size_t n_test = part_size(fractions[2]);
  if (n_val + n_test > n || (fractions[0] > 0.0 && n_val + n_test == n)) {
    throw InvalidArgument("split leaves no room for the training part");
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = Rng::stream(seed, "split");
  rng.shuffle(perm.begin(), perm.end());

  Split s;
  const std::size_t n_train = n - n_val - n_test;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return s;
}

void save_predictions(const PredictionSet& pred, const std::filesystem::path& path) {
  pred.validate();
  auto out = open_for_write(path);
  out << (pred.truth ? "prob,outcome,truth_prob\n" : "prob,outcome\n");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out << format_double(pred.probs[i]) << ',' << pred.outcomes[i];
    if (pred.truth) out << ',' << format_double((*pred.truth)[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PredictionSet load_predictions(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("no records", 1);
  const auto header = split_fields(trim(line));
  const bool with_truth = header.size() == 3;
  if (header.size() < 2 || header.size() > 3 || trim(header[0]) != "prob" ||
      trim(header[1]) != "outcome" || (with_truth && trim(header[2]) != "truth_prob")) {
    throw ParseError("line 1: expected header 'prob,outcome[,truth_prob]'", 1);
  }
  PredictionSet pred;
  if (with_truth) pred.truth.emplace();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(trim(line));
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " fields",
                       line_no);
    }
    pred.probs.push_back(parse_prob(fields[0], line_no, "prob"));
    pred.outcomes.push_back(parse_outcome(fields[1], line_no));
    if (with_truth) pred.truth->push_back(parse_prob(fields[2], line_no, "truth_prob"));
  }
  if (pred.probs.empty()) throw ParseError("no records", line_no);
  return pred;
}

void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (std::size_t j = 0; j < dataset.dim(); ++j) out << 'f' << j << ',';
  out << "outcome";
  if (dataset.has_truth()) out << ",truth_prob";
  if (dataset.has_latent()) out << ",latent";
  out << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (double v : dataset.row(i)) out << format_double(v) << ',';
    out << dataset.outcomes()[i];
    if (dataset.has_truth()) out << ',' << format_double(dataset.truth_probs()[i]);
    if (dataset.has_latent()) out << ',' << format_double(dataset.latent()[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("no records", 1);
  const auto header = split_fields(trim(line));
  std::size_t d = 0;
  while (d < header.size() && trim(header[d]) == "f" + std::to_string(d)) ++d;
  if (d == 0 || d >= header.size() || trim(header[d]) != "outcome") {
    throw ParseError("line 1: expected header 'f0,...,f{d-1},outcome[,truth_prob][,latent]'", 1);
  }
  std::size_t col = d + 1;
  const bool with_truth = col < header.size() && trim(header[col]) == "truth_prob";
  if (with_truth) ++col;
  const bool with_latent = col < header.size() && trim(header[col]) == "latent";
  if (with_latent) ++col;
  if (col != header.size()) throw ParseError("line 1: unexpected trailing columns", 1);

  std::vector<double> values;
  std::vector<int> outcomes;
  std::optional<std::vector<double>> truth;
  std::optional<std::vector<double>> latent;
  if (with_truth) truth.emplace();
  if (with_latent) latent.emplace();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(trim(line));
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " fields",
                       line_no);
    }
    for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(fields[j], line_no));
    outcomes.push_back(parse_outcome(fields[d], line_no));
    std::size_t c = d + 1;
    if (with_truth) truth->push_back(parse_prob(fields[c++], line_no, "truth_prob"));
    if (with_latent) latent->push_back(parse_double(fields[c], line_no));
  }
  if (outcomes.empty()) throw ParseError("no records", line_no);
  FeatureMatrix x = Eigen::Map<FeatureMatrix>(values.data(),
                                              static_cast<Eigen::Index>(outcomes.size()),
                                              static_cast<Eigen::Index>(d));
  return LabeledDataset(std::move(x), std::move(outcomes), std::move(truth), std::move(latent));
}

}  // namespace probest
