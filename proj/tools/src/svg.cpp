#include "probest_tools/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "probest/data.hpp"
#include "probest/error.hpp"

namespace probest::tools {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << body;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

void open_svg(std::ostringstream& s, const PlotFrame& f, const std::string& title) {
  const double w = f.left + f.width + 30.0;
  const double h = f.top + f.height + 50.0;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\""
    << num(h) << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    s << "<text x=\"" << num(f.left + f.width / 2) << "\" y=\"18\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << escape(title) << "</text>\n";
  }
  s << "<rect class=\"frame\" x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\""
    << num(f.width) << "\" height=\"" << num(f.height)
    << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
}

void axis_labels(std::ostringstream& s, const PlotFrame& f, const std::string& x_label,
                 const std::string& y_label) {
  s << "<text x=\"" << num(f.left + f.width / 2) << "\" y=\"" << num(f.top + f.height + 40)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
    << escape(x_label) << "</text>\n";
  const double cx = 16.0;
  const double cy = f.top + f.height / 2;
  s << "<text x=\"" << num(cx) << "\" y=\"" << num(cy) << "\" transform=\"rotate(-90 " << num(cx)
    << ' ' << num(cy) << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" "
    << "font-size=\"12\">" << escape(y_label) << "</text>\n";
}

void ticks(std::ostringstream& s, const PlotFrame& f, double x0, double x1, double y0, double y1) {
  for (int i = 0; i <= 4; ++i) {
    const double t = i / 4.0;
    s << "<text x=\"" << num(f.px(t)) << "\" y=\"" << num(f.top + f.height + 16)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
      << num(x0 + t * (x1 - x0)) << "</text>\n";
    s << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(f.py(t) + 3)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
      << num(y0 + t * (y1 - y0)) << "</text>\n";
  }
}

}  // namespace

void render_reliability_svg(const ReliabilityCurve& curve, const std::filesystem::path& path,
                            const std::string& title) {
  if (curve.bins.empty()) throw InvalidArgument("cannot plot an empty reliability curve");
  const PlotFrame f;
  std::ostringstream s;
  open_svg(s, f, title);
  ticks(s, f, 0.0, 1.0, 0.0, 1.0);
  s << "<line class=\"diagonal\" x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0))
    << "\" x2=\"" << num(f.px(1)) << "\" y2=\"" << num(f.py(1))
    << "\" stroke=\"gray\" stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n";
  for (const auto& b : curve.bins) {
    s << "<circle class=\"bin\" cx=\"" << num(f.px(b.q_mean)) << "\" cy=\"" << num(f.py(b.p_emp))
      << "\" r=\"4\" fill=\"" << kPalette[0] << "\" data-q=\"" << format_double(b.q_mean)
      << "\" data-p=\"" << format_double(b.p_emp) << "\" data-count=\"" << b.count << "\"/>\n";
  }
  axis_labels(s, f, "mean predicted probability", "empirical frequency");
  s << "</svg>\n";
  write_file(path, s.str());
}

void render_line_svg(const std::vector<LineSeries>& series, const std::filesystem::path& path,
                     const std::string& x_label, const std::string& y_label,
                     const std::string& title) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& ser : series) {
    if (ser.x.size() != ser.y.size()) throw InvalidArgument("series x/y lengths differ");
    for (double v : ser.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : ser.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!(x0 <= x1)) throw InvalidArgument("cannot plot empty series");
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  y0 = std::min(y0, 0.0);

  const PlotFrame f;
  std::ostringstream s;
  open_svg(s, f, title);
  ticks(s, f, x0, x1, y0, y1);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& ser = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    s << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (i) s << ' ';
      s << num(f.px((ser.x[i] - x0) / (x1 - x0))) << ',' << num(f.py((ser.y[i] - y0) / (y1 - y0)));
    }
    s << "\"/>\n";
    s << "<text x=\"" << num(f.left + f.width - 8) << "\" y=\"" << num(f.top + 16 + 14.0 * k)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << color
      << "\">" << escape(ser.label) << "</text>\n";
  }
  axis_labels(s, f, x_label, y_label);
  s << "</svg>\n";
  write_file(path, s.str());
}

}  // namespace probest::tools
