#pragma once

// Hand-rolled SVG heatmaps for the coupling matrices.
//
// Colour ramp (5 stops, linear RGB interpolation between neighbours):
//   0.00 #2b2b2b  0.25 #3b528b  0.50 #21918c  0.75 #5ec962  1.00 #fde725

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace komet {

/// RGB for u in [0, 1] (clamped).
std::array<int, 3> ramp_color(double u);

struct HeatmapOptions {
  std::string title;
  double vmin = 0.0;
  double vmax = 1.0;
  std::vector<int> separators;  // draw a white line before these row/column indices
  int cell = 22;                // pixels per cell
};

std::string heatmap_svg(const Eigen::MatrixXd& m, const std::vector<std::string>& labels, const HeatmapOptions& opts);

}  // namespace komet
