#pragma once

#include <string>
#include <vector>

namespace screekit {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
};

struct PlotAxes {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 320;
};

/// Line plot as a standalone SVG document. Output depends only on the inputs.
std::string svg_line_plot(const PlotAxes& axes, const std::vector<PlotSeries>& series);

}  // namespace screekit
