#include "sfm/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace sfm {

namespace {

constexpr double kWidth = 640, kHeight = 420, kLeft = 60, kRight = 20, kTop = 20, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Frame {
  double x_max = 1.0;
  double px(double x) const { return kLeft + x / x_max * (kWidth - kLeft - kRight); }
  double py(double y) const { return kTop + (1.0 - y) * (kHeight - kTop - kBottom); }
};

void axes(std::ostringstream& svg, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(f.x_max))
      << "\" y2=\"" << num(f.py(0)) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(0))
      << "\" y2=\"" << num(f.py(1)) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    svg << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(f.py(v) + 4)
        << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
    svg << "<text x=\"" << num(f.px(v * f.x_max)) << "\" y=\"" << num(f.py(0) + 18)
        << "\" text-anchor=\"middle\">" << num(v * f.x_max) << "</text>\n";
  }
  svg << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << num(kHeight - 8)
      << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  svg << "<text x=\"14\" y=\"" << num((kTop + kHeight - kBottom) / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << num((kTop + kHeight - kBottom) / 2)
      << ")\">" << ylabel << "</text>\n";
}

void steps(std::ostringstream& svg, const Frame& f, const std::vector<double>& grid,
           const std::vector<double>& values, const char* color, bool dashed) {
  svg << "<polyline fill=\"none\" stroke=\"" << color << "\"" << (dashed ? " stroke-dasharray=\"4 3\"" : "")
      << " points=\"" << num(f.px(0)) << ',' << num(f.py(1));
  double prev = 1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    svg << ' ' << num(f.px(grid[i])) << ',' << num(f.py(prev)) << ' ' << num(f.px(grid[i])) << ','
        << num(f.py(values[i]));
    prev = values[i];
  }
  svg << ' ' << num(f.px(f.x_max)) << ',' << num(f.py(prev)) << "\"/>\n";
}

void legend(std::ostringstream& svg, std::size_t slot, const std::string& label, const char* color) {
  const double y = kTop + 12 + 16 * static_cast<double>(slot);
  const double x = kWidth - kRight - 150;
  svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(y - 4) << "\" x2=\"" << num(x + 20) << "\" y2=\""
      << num(y - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
  svg << "<text x=\"" << num(x + 26) << "\" y=\"" << num(y) << "\">" << label << "</text>\n";
}

}  // namespace

std::string survival_svg(std::span<const LabeledCurve> curves) {
  Frame f;
  f.x_max = 0.0;
  for (const auto& c : curves)
    if (c.curve->size() > 0) f.x_max = std::max(f.x_max, c.curve->grid.back());
  if (!(f.x_max > 0.0)) f.x_max = 1.0;
  std::ostringstream svg;
  axes(svg, f, "time", "survival");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kColors[i % 4];
    const SurvivalCurve& c = *curves[i].curve;
    steps(svg, f, c.grid, c.survival, color, false);
    if (c.has_bands()) {
      steps(svg, f, c.grid, c.lower, color, true);
      steps(svg, f, c.grid, c.upper, color, true);
    }
    legend(svg, i, curves[i].label, color);
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string calibration_svg(std::span<const CalibrationPoint> points, double slope) {
  Frame f;
  std::ostringstream svg;
  axes(svg, f, "observed cumulative risk", "predicted cumulative risk");
  svg << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(1))
      << "\" y2=\"" << num(f.py(1)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"" << kColors[0] << "\" points=\"";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i) svg << ' ';
    svg << num(f.px(std::clamp(points[i].observed, 0.0, 1.0))) << ','
        << num(f.py(std::clamp(points[i].predicted, 0.0, 1.0)));
  }
  svg << "\"/>\n";
  legend(svg, 0, "model (slope " + num(slope) + ")", kColors[0]);
  legend(svg, 1, "ideal", "gray");
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace sfm
