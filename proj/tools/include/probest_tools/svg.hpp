#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "probest/metrics.hpp"

namespace probest::tools {

/// Reliability diagram: unit square, dashed identity diagonal, one marker per
/// bin at (q_mean, p_emp). Throws InvalidArgument on an empty curve (no file
/// is created) and std::runtime_error when the file cannot be written.
void render_reliability_svg(const ReliabilityCurve& curve, const std::filesystem::path& path,
                            const std::string& title = "");

struct LineSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart with linear axes fitted to the data.
void render_line_svg(const std::vector<LineSeries>& series, const std::filesystem::path& path,
                     const std::string& x_label, const std::string& y_label,
                     const std::string& title = "");

/// Plot-area geometry shared by the renderers; exposed so tests can map
/// markers back to data coordinates.
struct PlotFrame {
  double left = 60.0;
  double top = 30.0;
  double width = 400.0;
  double height = 400.0;

  double px(double x01) const { return left + x01 * width; }
  double py(double y01) const { return top + (1.0 - y01) * height; }
};

}  // namespace probest::tools
