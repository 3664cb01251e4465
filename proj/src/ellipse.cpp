#include "fibertrack/ellipse.hpp"

#include <cmath>

namespace fibertrack {

BBox ellipse_min_bbox(const Ellipse& e) {
  const double c = std::cos(e.theta);
  const double s = std::sin(e.theta);
  const double hw = std::sqrt(e.a * e.a * c * c + e.b * e.b * s * s);
  const double hh = std::sqrt(e.a * e.a * s * s + e.b * e.b * c * c);
  return {e.cx - hw, e.cy - hh, e.cx + hw, e.cy + hh};
}

}  // namespace fibertrack
