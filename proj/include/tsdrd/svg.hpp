#pragma once

#include <string>
#include <vector>

namespace tsdrd {

// One polyline; x positions are the record indices.
struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<double> values;
};

// Static line chart with a fixed deterministic layout; byte-stable given
// identical inputs. Throws on empty input or unwritable path.
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label,
                          const std::vector<SvgSeries>& series);

}  // namespace tsdrd
