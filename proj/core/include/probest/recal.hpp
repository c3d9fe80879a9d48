#pragma once

#include <span>
#include <string>
#include <vector>

namespace probest {

/// p -> sigmoid(w * logit(p) + b)
struct PlattParams {
  double w = 1.0;
  double b = 0.0;
};

/// p -> sigmoid(logit(p) / T)
struct TempParams {
  double T = 1.0;
};

/// Logit with the probability clamped to [1e-12, 1 - 1e-12].
double safe_logit(double p) noexcept;

/// Minimizes validation NLL of sigmoid(w s + b) over logits s by damped
/// Newton iterations (stops at gradient norm < 1e-9 or 200 iterations).
/// Throws FitError when the validation outcomes contain a single class.
PlattParams platt_fit(std::span<const double> val_probs, std::span<const int> val_outcomes);
std::vector<double> platt_apply(const PlattParams& params, std::span<const double> probs);

/// Golden-section search for T in [1e-2, 1e2] (on log T) minimizing
/// validation NLL. Throws FitError on single-class input.
TempParams temperature_fit(std::span<const double> val_probs, std::span<const int> val_outcomes);
std::vector<double> temperature_apply(const TempParams& params, std::span<const double> probs);

/// NLL of sigmoid(w s + b) on clamped-logit inputs; exposed for tests.
double platt_nll(const PlattParams& params, std::span<const double> probs,
                 std::span<const int> outcomes);

std::string to_json(const PlattParams& params);
std::string to_json(const TempParams& params);
PlattParams platt_from_json(const std::string& text);
TempParams temperature_from_json(const std::string& text);

}  // namespace probest
