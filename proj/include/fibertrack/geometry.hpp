#pragma once

#include <vector>

namespace fibertrack {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Axis-aligned box in continuous pixel coordinates, origin top-left.
// Valid boxes have x1 < x2 and y1 < y2. Boxes are deliberately not clamped to
// image bounds; Kalman predictions may drift past borders before the tracker
// death rule fires. Clamping happens only at rendering/export.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  Point center() const { return {0.5 * (x1 + x2), 0.5 * (y1 + y2)}; }
  bool valid() const { return x1 < x2 && y1 < y2; }
};

struct Detection {
  int frame = 0;
  BBox box;
  double score = 1.0;
};

using FrameBoxes = std::vector<BBox>;
// Per-frame unscored boxes acting as training labels; index = frame number.
using PseudoGT = std::vector<FrameBoxes>;

// Intersection over union under the continuous-area convention (no +1 pixel
// correction). Symmetric, 0 for disjoint boxes, 1 for identical ones.
double iou(const BBox& a, const BBox& b);

// Euclidean distance between box centers, in pixels.
double center_distance(const BBox& a, const BBox& b);

// Greedy non-maximum suppression: repeatedly keep the highest-score remaining
// detection and discard the rest with IoU strictly above `threshold` against
// it. Output sorted by descending score; ties broken by lower original index.
std::vector<Detection> nms(const std::vector<Detection>& dets, double threshold);

}  // namespace fibertrack
