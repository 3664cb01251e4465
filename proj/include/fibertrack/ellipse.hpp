#pragma once

#include "fibertrack/geometry.hpp"

namespace fibertrack {

// Fitted ellipse: center, semi-major a >= semi-minor b > 0, orientation theta
// in [0, pi). `votes` carries the accumulator peak for Hough candidates.
struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double a = 1.0;
  double b = 1.0;
  double theta = 0.0;
  int votes = 0;
};

// Tight axis-aligned bounding box of the ellipse:
//   half-width  = sqrt(a^2 cos^2 t + b^2 sin^2 t)
//   half-height = sqrt(a^2 sin^2 t + b^2 cos^2 t)
BBox ellipse_min_bbox(const Ellipse& e);

}  // namespace fibertrack
