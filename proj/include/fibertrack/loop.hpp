#pragma once

#include <filesystem>
#include <vector>

#include "fibertrack/detector.hpp"
#include "fibertrack/evaluation.hpp"
#include "fibertrack/geometry.hpp"
#include "fibertrack/initializer.hpp"
#include "fibertrack/synthgen.hpp"
#include "fibertrack/tracker.hpp"

namespace fibertrack {

struct LoopConfig {
  int beta = 5;                  // prune trajectories with history length <= beta
  double refine_nms = 0.7;       // 0.7 for EMMPMH init, 0.1 for proposal init
  int max_iterations = 4;
  double convergence_epsilon = 0.01;  // pseudo-GT mismatch fraction
  // A track dead by timeout ends in alpha evidence-free predicted boxes; by
  // default that trailing run is stripped before pruning and pooling. false
  // keeps the literal prune-then-NMS behaviour.
  bool drop_trailing_timeout_predictions = true;

  InitConfig init;
  SamplerConfig sampler;
  TrainConfig train;
  double detector_score_threshold = 0.5;
  double detector_nms = 0.3;
  TrackerConfig tracker;
  int threads = 1;
  uint64_t rng_seed = 1;

  void validate() const;
};

struct IterationReport {
  int iteration = 0;
  std::vector<int> per_frame_counts;
  double pseudo_gt_delta = 0.0;  // vs the previous iteration's pseudo GT
  bool converged = false;

  bool has_detection_metrics = false;
  DetectionMetrics detection_all;
  DetectionMetrics detection_degraded;  // frames flagged degraded only
  DetectionMetrics detection_clean;
  bool has_raw_detector_metrics = false;
  DetectionMetrics raw_detector;
  bool has_mot = false;
  MotMetrics mot;
};

struct LoopResult {
  PseudoGT final_detections;
  std::vector<TrackState> tracks;  // refined (pruned) tracks of the last iteration
  DetectorModel model;
  std::vector<IterationReport> reports;
  bool converged = false;
};

// Copies of the input tracks with refinement filters applied: dead tracks
// optionally lose their trailing unassociated run, then tracks with history
// length <= beta are dropped.
std::vector<TrackState> refine_tracks(const std::vector<TrackState>& tracks,
                                      const LoopConfig& cfg);

// "Tracking as detections": pool the refined tracks' boxes per frame and run
// per-frame NMS (associated entries score 1, predicted ones 0.5, so real
// evidence wins overlaps). Boxes whose center left the image are dropped.
PseudoGT tracks_to_detections(const std::vector<TrackState>& tracks, const LoopConfig& cfg,
                              int num_frames);

// The pseudo ground truth is replaced wholesale by the refined boxes.
PseudoGT update_pseudo_gt(const PseudoGT& gp, PseudoGT refined);

// Symmetric mismatch fraction: per frame, maximum one-to-one matching at
// IoU >= 0.5; delta = (unmatched_a + unmatched_b) / (|a| + |b|) over the
// whole sequence. 0 means perfectly matched sets.
double pseudo_gt_delta(const PseudoGT& a, const PseudoGT& b, double iou_threshold = 0.5);

// The full self-training loop: initialize the pseudo ground truth, then
// iterate train-or-fine-tune / detect / track / refine / update until the
// pseudo GT stabilizes or the iteration budget is exhausted. When out_dir is
// non-empty, per-iteration artifacts are written to iter_<k>/ underneath it.
LoopResult run_algorithm1(const SequenceDataset& dataset, const LoopConfig& cfg,
                          const std::filesystem::path& out_dir = {});

// Detect-only application of a trained model to independent images.
std::vector<std::vector<Detection>> detect_single_images(const DetectorModel& model,
                                                         const std::vector<Image>& images,
                                                         int threads = 1);

void write_iteration_report(const std::filesystem::path& path, const IterationReport& report);

}  // namespace fibertrack
