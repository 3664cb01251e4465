#include "fibertrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fibertrack {

double iou(const BBox& a, const BBox& b) {
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);
  const double iw = ix2 - ix1;
  const double ih = iy2 - iy1;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

double center_distance(const BBox& a, const BBox& b) {
  const Point ca = a.center();
  const Point cb = b.center();
  return std::hypot(ca.x - cb.x, ca.y - cb.y);
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
    return dets[lhs].score > dets[rhs].score;
  });

  std::vector<Detection> kept;
  kept.reserve(dets.size());
  std::vector<char> suppressed(dets.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (suppressed[order[i]]) continue;
    const Detection& best = dets[order[i]];
    kept.push_back(best);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (suppressed[order[j]]) continue;
      if (iou(best.box, dets[order[j]].box) > threshold) suppressed[order[j]] = 1;
    }
  }
  return kept;
}

}  // namespace fibertrack
