// Renders a trajectory CSV as a static SVG line chart (populations vs time).
#pragma once

#include <string>

#include "csv.hpp"

namespace cart::cli {

struct PlotOptions {
  bool log_y = false;  // log10 vertical axis; non-positive points are skipped
  int width = 960;
  int height = 560;
  std::string title;
};

// Plots the x1/x2/x3 columns of a trajectory table against its first column.
// Throws InvalidInputError if the table has no data rows or none of the
// population columns.
std::string trajectory_svg(const CsvTable& t, const PlotOptions& opts = {});

}  // namespace cart::cli
