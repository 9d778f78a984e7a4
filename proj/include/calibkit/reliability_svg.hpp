#pragma once

#include <string>

#include "calibkit/calibration_metrics.hpp"

namespace calibkit {

struct RenderStyle {
  int width = 480;
  int height = 480;
  double margin = 56.0;
  // Point radius in pixels: base_radius + radius_scale * ln(1 + sample_count).
  double base_radius = 2.0;
  double radius_scale = 1.5;
  // Default puts accuracy on x and confidence on y, so bins above the
  // identity line are over-confident. Standard axes swap them.
  bool standard_axes = false;
  std::string title;
};

double point_radius(const RenderStyle& style, std::size_t sample_count);

// One circle per bin plus the y = x line; EM and ECE in the title block.
// Byte-deterministic for a given (report, style). Throws Error on a report
// without bins.
std::string render_reliability(const CalibrationReport& report, const RenderStyle& style = {});

}  // namespace calibkit
