#pragma once

#include <iosfwd>
#include <vector>

#include "fibertrack/geometry.hpp"
#include "fibertrack/io.hpp"

namespace fibertrack {

struct FrameCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  double nfp_per_image = 0.0;
  double nfn_per_image = 0.0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  int frames = 0;
  std::vector<FrameCounts> per_frame;
};

// Per frame, a maximum one-to-one matching between detections and ground
// truth over pairs with IoU >= threshold (maximum match count first, then
// maximum total IoU). Frame ranges must align.
DetectionMetrics detection_metrics(const std::vector<FrameBoxes>& detections,
                                   const std::vector<FrameBoxes>& ground_truth,
                                   double iou_threshold = 0.5);

struct MotFrameCounts {
  int frame = 0;
  int matches = 0;
  int misses = 0;
  int false_positives = 0;
  int id_switches = 0;
};

struct MotMetrics {
  double recall = 0.0;  // matched GT positions / total GT positions
  double mota = 0.0;    // 1 - (FN + FP + IDSW) / total GT positions
  long idsw = 0;
  int mostly_tracked = 0;   // GT trajectories hit in >= 80% of their frames
  int mostly_lost = 0;      // GT trajectories hit in <= 20% of their frames
  int gt_trajectories = 0;
  long total_gt_positions = 0;
  long misses = 0;
  long false_positives = 0;
  std::vector<MotFrameCounts> per_frame;
};

struct MotConfig {
  double hit_threshold = 20.0;  // pixels, center distance
  // When set, hypothesis trajectories that never come within hit_threshold of
  // any ground-truth position are excluded from FP counting (the incomplete
  // ground-truth protocol). Off by default: synthetic GT is complete.
  bool restrict_to_gt = false;
};

// CLEAR procedure: correspondences persist from the previous frame while
// still within the threshold; the remainder is re-matched by minimum total
// center distance. An identity switch is counted when a ground-truth
// trajectory's matched hypothesis id differs from the one at its previous
// matched frame. Duplicate (id, frame) entries raise DataError.
MotMetrics mot_metrics(const std::vector<TrackRecord>& hypotheses,
                       const std::vector<TrackRecord>& ground_truth,
                       const MotConfig& cfg = {});

void print_detection_report(std::ostream& os, const DetectionMetrics& m, bool per_frame_table);
void print_mot_report(std::ostream& os, const MotMetrics& m, const MotConfig& cfg,
                      bool per_frame_table);

}  // namespace fibertrack
