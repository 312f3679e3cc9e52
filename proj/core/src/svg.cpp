// SPDX-License-Identifier: Apache-2.0
#include "segzsl/svg.hpp"

#include <algorithm>
#include <sstream>

#include "segzsl/error.hpp"

namespace segzsl {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 24.0;
constexpr double kMarginTop = 32.0;
constexpr double kMarginBottom = 56.0;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::string sweep_svg(const SweepResult& result) {
  if (result.counts.empty() || result.accuracy.empty()) {
    fail(Errc::invalid_argument, "sweep_svg: empty sweep result");
  }
  const double x_min = static_cast<double>(result.counts.front());
  const double x_max = static_cast<double>(result.counts.back());
  const double x_span = x_max > x_min ? x_max - x_min : 1.0;
  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double count) {
    return kMarginLeft + (count - x_min) / x_span * plot_w;
  };
  auto py = [&](double acc) { return kMarginTop + (1.0 - acc) * plot_h; };

  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
     << kHeight << "\">\n";
  os << "  <rect width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" fill=\"white\"/>\n";
  // Axes.
  os << "  <line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop
     << "\" x2=\"" << kMarginLeft << "\" y2=\"" << kMarginTop + plot_h
     << "\" stroke=\"black\"/>\n";
  os << "  <line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h
     << "\" x2=\"" << kMarginLeft + plot_w << "\" y2=\""
     << kMarginTop + plot_h << "\" stroke=\"black\"/>\n";
  // Y gridlines and labels at 0, 0.25, ..., 1.
  for (int i = 0; i <= 4; ++i) {
    const double acc = 0.25 * i;
    os << "  <line x1=\"" << kMarginLeft << "\" y1=\"" << py(acc)
       << "\" x2=\"" << kMarginLeft + plot_w << "\" y2=\"" << py(acc)
       << "\" stroke=\"#dddddd\"/>\n";
    os << "  <text x=\"" << kMarginLeft - 8 << "\" y=\"" << py(acc) + 4
       << "\" font-size=\"12\" text-anchor=\"end\">" << fmt(acc)
       << "</text>\n";
  }
  // X tick per count.
  for (std::size_t count : result.counts) {
    const double x = px(static_cast<double>(count));
    os << "  <line x1=\"" << x << "\" y1=\"" << kMarginTop + plot_h
       << "\" x2=\"" << x << "\" y2=\"" << kMarginTop + plot_h + 5
       << "\" stroke=\"black\"/>\n";
    os << "  <text x=\"" << x << "\" y=\"" << kMarginTop + plot_h + 20
       << "\" font-size=\"12\" text-anchor=\"middle\">" << count
       << "</text>\n";
  }
  os << "  <text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\""
     << kHeight - 12
     << "\" font-size=\"13\" text-anchor=\"middle\">exemplars per "
        "class</text>\n";
  os << "  <text x=\"16\" y=\"" << kMarginTop + plot_h / 2
     << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 "
        "16 "
     << kMarginTop + plot_h / 2 << ")\">per-class accuracy</text>\n";

  std::size_t color_idx = 0;
  double legend_y = kMarginTop + 8;
  for (const auto& [kind, curve] : result.accuracy) {
    const char* color = colors[color_idx % 4];
    ++color_idx;
    os << "  <polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.size() && i < result.counts.size();
         ++i) {
      if (i) os << ' ';
      os << fmt(px(static_cast<double>(result.counts[i]))) << ','
         << fmt(py(std::clamp(curve[i], 0.0, 1.0)));
    }
    os << "\"/>\n";
    os << "  <line x1=\"" << kMarginLeft + plot_w - 110 << "\" y1=\""
       << legend_y << "\" x2=\"" << kMarginLeft + plot_w - 86 << "\" y2=\""
       << legend_y << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "  <text x=\"" << kMarginLeft + plot_w - 80 << "\" y=\""
       << legend_y + 4 << "\" font-size=\"12\">" << kind << "</text>\n";
    legend_y += 18;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace segzsl
