#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "fibertrack/geometry.hpp"
#include "fibertrack/io.hpp"

namespace fibertrack {

// State layout follows the tracked box corners:
// (x1, y1, vx1, vy1, x2, y2, vx2, vy2), pixels and pixels/frame.
using StateVector = Eigen::Matrix<double, 8, 1>;
using StateCovariance = Eigen::Matrix<double, 8, 8>;

struct TrackEntry {
  int frame = 0;
  BBox box;
  bool associated = false;  // false: predicted fill-in
};

enum class TrackStatus { Active, Dead };

struct TrackState {
  int id = 0;
  StateVector state = StateVector::Zero();
  StateCovariance covariance = StateCovariance::Zero();
  int missed_count = 0;
  std::vector<TrackEntry> history;
  TrackStatus status = TrackStatus::Active;

  BBox box() const { return {state(0), state(1), state(4), state(5)}; }
};

struct TrackerConfig {
  double dummy_cost = 100.0;      // pixels; cost of leaving a node unmatched
  int alpha = 5;                  // death after this many consecutive misses
  double process_noise = 1.0;     // q, px^2
  double measurement_noise = 4.0; // r, px^2
  std::array<double, 8> initial_covariance = {10, 10, 100, 100, 10, 10, 100, 100};
  double image_width = 0.0;
  double image_height = 0.0;

  void validate() const;
};

// Constant-velocity prediction: positions advance by their velocities,
// P <- F P F^T + qI.
TrackState kalman_predict(const TrackState& track, double process_noise);

// Standard Kalman correction against the four measured corner coordinates,
// R = rI. The posterior covariance is re-symmetrized.
TrackState kalman_correct(const TrackState& track, const BBox& measurement,
                          double measurement_noise);

struct AssociationResult {
  std::vector<std::pair<int, int>> matches;  // (prediction index, detection index)
  std::vector<int> unmatched_predictions;
  std::vector<int> unmatched_detections;
};

// Bipartite center-distance matching with dummy nodes: the (n+m)x(n+m) cost
// matrix holds center distances for real pairs, dummy_cost for real-dummy
// pairs and 0 for dummy-dummy pairs. Anything matched to a dummy is reported
// unmatched.
AssociationResult associate(const std::vector<BBox>& predictions,
                            const std::vector<BBox>& detections, double dummy_cost);

// One tracking step: predict, kill boundary leavers, associate, correct or
// record predictions, birth new tracks from unmatched detections, kill tracks
// that reached alpha consecutive misses.
void track_step(std::vector<TrackState>& tracks, const std::vector<Detection>& detections,
                const TrackerConfig& cfg, int frame_index, int& next_track_id);

// Folds track_step over the frames; returns every track ever born, dead ones
// included, with full histories.
std::vector<TrackState> track_sequence(const std::vector<std::vector<Detection>>& per_frame,
                                       const TrackerConfig& cfg);

// Track serialization records: score 1 for associated entries, 0 for
// predicted ones.
std::vector<TrackRecord> tracks_to_records(const std::vector<TrackState>& tracks);

}  // namespace fibertrack
