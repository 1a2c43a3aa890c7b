#include "tsdrd/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace tsdrd {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

std::string fmt4(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", x);
  return buf;
}

}  // namespace

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label,
                          const std::vector<SvgSeries>& series) {
  if (series.empty()) throw std::runtime_error("svg: no series to plot");
  std::size_t n = 0;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      if (first) {
        lo = hi = v;
        first = false;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (n == 0 || first) throw std::runtime_error("svg: series have no values");
  if (hi - lo < 1e-12) {
    hi = lo + 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto x_of = [&](std::size_t i) {
    return n == 1 ? kMarginLeft + plot_w / 2.0
                  : kMarginLeft + plot_w * static_cast<double>(i) /
                        static_cast<double>(n - 1);
  };
  auto y_of = [&](double v) {
    return kMarginTop + plot_h * (1.0 - (v - lo) / (hi - lo));
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg: cannot open for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt2(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";

  // axes
  out << "<line x1=\"" << fmt2(kMarginLeft) << "\" y1=\"" << fmt2(kMarginTop)
      << "\" x2=\"" << fmt2(kMarginLeft) << "\" y2=\""
      << fmt2(kHeight - kMarginBottom) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt2(kMarginLeft) << "\" y1=\""
      << fmt2(kHeight - kMarginBottom) << "\" x2=\"" << fmt2(kWidth - kMarginRight)
      << "\" y2=\"" << fmt2(kHeight - kMarginBottom) << "\" stroke=\"black\"/>\n";

  // y ticks
  for (int t = 0; t <= 4; ++t) {
    double v = lo + (hi - lo) * t / 4.0;
    double y = y_of(v);
    out << "<line x1=\"" << fmt2(kMarginLeft - 4) << "\" y1=\"" << fmt2(y)
        << "\" x2=\"" << fmt2(kMarginLeft) << "\" y2=\"" << fmt2(y)
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt2(kMarginLeft - 8) << "\" y=\"" << fmt2(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt4(v) << "</text>\n";
  }
  out << "<text x=\"" << fmt2(kMarginLeft + plot_w / 2) << "\" y=\""
      << fmt2(kHeight - 14)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << x_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    if (s.values.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (i) out << ' ';
      out << fmt2(x_of(i)) << ',' << fmt2(y_of(s.values[i]));
    }
    out << "\"/>\n";
    double ly = kMarginTop + 16.0 * static_cast<double>(si);
    out << "<rect x=\"" << fmt2(kWidth - kMarginRight - 150) << "\" y=\""
        << fmt2(ly) << "\" width=\"10\" height=\"10\" fill=\"" << s.color
        << "\"/>\n";
    out << "<text x=\"" << fmt2(kWidth - kMarginRight - 136) << "\" y=\""
        << fmt2(ly + 9)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("svg: write failed: " + path);
}

}  // namespace tsdrd
