#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace l2r::cli {

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;  ///< shown as a tooltip
};

/// Standalone SVG scatter plot with labelled axes. Text is XML-escaped.
std::string scatter_svg(const std::vector<ScatterPoint>& points, std::string_view title, std::string_view x_label,
                        std::string_view y_label);

std::string xml_escape(std::string_view text);

}  // namespace l2r::cli
