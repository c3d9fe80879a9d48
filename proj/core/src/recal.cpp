#include "probest/recal.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "probest/error.hpp"
#include "probest/synthgen.hpp"

namespace probest {
namespace {

constexpr double kClamp = 1e-12;
constexpr int kMaxNewtonIterations = 200;
constexpr double kGradTolerance = 1e-9;

double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

void check_fit_input(std::span<const double> probs, std::span<const int> outcomes) {
  if (probs.size() != outcomes.size()) throw InvalidArgument("probs/outcomes length mismatch");
  bool pos = false, neg = false;
  for (int y : outcomes) {
    pos = pos || y == 1;
    neg = neg || y == 0;
  }
  if (!pos || !neg) throw FitError("calibration set must contain both outcome classes");
}

// Mean NLL of sigmoid(w s + b) given logits s.
double nll_on_logits(double w, double b, std::span<const double> s, std::span<const int> y) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double z = w * s[i] + b;
    total += y[i] == 1 ? softplus(-z) : softplus(z);
  }
  return total / static_cast<double>(s.size());
}

std::vector<double> logits_of(std::span<const double> probs) {
  std::vector<double> s(probs.size());
  std::transform(probs.begin(), probs.end(), s.begin(), safe_logit);
  return s;
}

}  // namespace

double safe_logit(double p) noexcept {
  const double c = std::clamp(p, kClamp, 1.0 - kClamp);
  return std::log(c) - std::log1p(-c);
}

double platt_nll(const PlattParams& params, std::span<const double> probs,
                 std::span<const int> outcomes) {
  const auto s = logits_of(probs);
  return nll_on_logits(params.w, params.b, s, outcomes);
}

PlattParams platt_fit(std::span<const double> val_probs, std::span<const int> val_outcomes) {
  check_fit_input(val_probs, val_outcomes);
  const auto s = logits_of(val_probs);
  const auto n = static_cast<double>(s.size());
  double w = 1.0, b = 0.0;
  double f = nll_on_logits(w, b, s, val_outcomes);
  for (int iter = 0; iter < kMaxNewtonIterations; ++iter) {
    double gw = 0.0, gb = 0.0, hww = 0.0, hwb = 0.0, hbb = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double p = sigmoid(w * s[i] + b);
      const double r = p - val_outcomes[i];
      const double v = p * (1.0 - p);
      gw += r * s[i];
      gb += r;
      hww += v * s[i] * s[i];
      hwb += v * s[i];
      hbb += v;
    }
    gw /= n; gb /= n; hww /= n; hwb /= n; hbb /= n;
    if (std::hypot(gw, gb) < kGradTolerance) break;

    // Levenberg-style damping keeps the 2x2 system positive definite when the
    // sample is (nearly) separable.
    double damping = 1e-12 * (hww + hbb) + 1e-15;
    double dw = 0.0, db = 0.0;
    const double det0 = hww * hbb - hwb * hwb;
    if (det0 <= damping * (hww + hbb)) damping = std::max(damping, 1e-6 * (hww + hbb) + 1e-12);
    const double a = hww + damping, c = hbb + damping;
    const double det = a * c - hwb * hwb;
    dw = -(c * gw - hwb * gb) / det;
    db = -(a * gb - hwb * gw) / det;

    // Backtracking line search on the NLL.
    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const double fw = nll_on_logits(w + step * dw, b + step * db, s, val_outcomes);
      if (fw <= f + 1e-4 * step * (gw * dw + gb * db)) {
        w += step * dw;
        b += step * db;
        f = fw;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  if (!std::isfinite(w) || !std::isfinite(b)) throw FitError("Platt fit diverged");
  return {w, b};
}

std::vector<double> platt_apply(const PlattParams& params, std::span<const double> probs) {
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = sigmoid(params.w * safe_logit(probs[i]) + params.b);
  }
  return out;
}

TempParams temperature_fit(std::span<const double> val_probs, std::span<const int> val_outcomes) {
  check_fit_input(val_probs, val_outcomes);
  const auto s = logits_of(val_probs);
  auto objective = [&](double log_t) {
    return nll_on_logits(std::exp(-log_t), 0.0, s, val_outcomes);
  };
  // NLL is convex in 1/T, hence unimodal in log T.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(1e-2), hi = std::log(1e2);
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = objective(x1), f2 = objective(x2);
  while (hi - lo > 1e-10) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective(x2);
    }
  }
  const double best = f1 <= f2 ? x1 : x2;
  return {std::exp(best)};
}

std::vector<double> temperature_apply(const TempParams& params, std::span<const double> probs) {
  if (!(params.T > 0.0)) throw InvalidArgument("temperature must be positive");
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = sigmoid(safe_logit(probs[i]) / params.T);
  return out;
}

std::string to_json(const PlattParams& params) {
  return nlohmann::json{{"w", params.w}, {"b", params.b}}.dump();
}

std::string to_json(const TempParams& params) {
  return nlohmann::json{{"T", params.T}}.dump();
}

PlattParams platt_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return {j.at("w").get<double>(), j.at("b").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed Platt parameters: ") + e.what());
  }
}

TempParams temperature_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TempParams t{j.at("T").get<double>()};
    if (!(t.T > 0.0)) throw InvalidArgument("temperature must be positive");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed temperature parameters: ") + e.what());
  }
}

}  // namespace probest
