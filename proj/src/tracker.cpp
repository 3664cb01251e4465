#include "fibertrack/tracker.hpp"

#include <algorithm>
#include <cmath>

#include "fibertrack/common.hpp"
#include "fibertrack/hungarian.hpp"

namespace fibertrack {

namespace {

Eigen::Matrix<double, 8, 8> transition_matrix() {
  Eigen::Matrix<double, 8, 8> f = Eigen::Matrix<double, 8, 8>::Identity();
  f(0, 2) = 1.0;  // x1 += vx1
  f(1, 3) = 1.0;  // y1 += vy1
  f(4, 6) = 1.0;  // x2 += vx2
  f(5, 7) = 1.0;  // y2 += vy2
  return f;
}

Eigen::Matrix<double, 4, 8> measurement_matrix() {
  Eigen::Matrix<double, 4, 8> h = Eigen::Matrix<double, 4, 8>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  h(2, 4) = 1.0;
  h(3, 5) = 1.0;
  return h;
}

}  // namespace

void TrackerConfig::validate() const {
  if (dummy_cost <= 0) throw DataError("tracker: dummy_cost must be positive");
  if (alpha < 1) throw DataError("tracker: alpha must be >= 1");
  if (process_noise <= 0 || measurement_noise <= 0)
    throw DataError("tracker: noise parameters must be positive");
  if (image_width <= 0 || image_height <= 0)
    throw DataError("tracker: image bounds must be set");
}

TrackState kalman_predict(const TrackState& track, double process_noise) {
  static const auto f = transition_matrix();
  TrackState out = track;
  out.state = f * track.state;
  out.covariance = f * track.covariance * f.transpose() +
                   process_noise * StateCovariance::Identity();
  return out;
}

TrackState kalman_correct(const TrackState& track, const BBox& measurement,
                          double measurement_noise) {
  static const auto h = measurement_matrix();
  if (measurement_noise <= 0) throw DataError("tracker: measurement noise must be positive");

  Eigen::Matrix<double, 4, 1> z;
  z << measurement.x1, measurement.y1, measurement.x2, measurement.y2;

  const Eigen::Matrix<double, 4, 4> innovation_cov =
      h * track.covariance * h.transpose() +
      measurement_noise * Eigen::Matrix<double, 4, 4>::Identity();
  const Eigen::Matrix<double, 8, 4> gain =
      track.covariance * h.transpose() * innovation_cov.llt().solve(Eigen::Matrix<double, 4, 4>::Identity());

  TrackState out = track;
  out.state = track.state + gain * (z - h * track.state);
  out.covariance = (StateCovariance::Identity() - gain * h) * track.covariance;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

AssociationResult associate(const std::vector<BBox>& predictions,
                            const std::vector<BBox>& detections, double dummy_cost) {
  const int n = static_cast<int>(predictions.size());
  const int m = static_cast<int>(detections.size());
  AssociationResult result;
  if (n == 0 && m == 0) return result;

  const int size = n + m;
  CostMatrix cost(static_cast<std::size_t>(size),
                  std::vector<double>(static_cast<std::size_t>(size), 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          center_distance(predictions[static_cast<std::size_t>(i)], detections[static_cast<std::size_t>(j)]);
  for (int i = 0; i < n; ++i)
    for (int j = m; j < size; ++j) cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = dummy_cost;
  for (int i = n; i < size; ++i)
    for (int j = 0; j < m; ++j) cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = dummy_cost;

  const Assignment assignment = hungarian(cost);
  std::vector<char> det_matched(static_cast<std::size_t>(m), 0);
  for (const auto& [row, col] : assignment) {
    if (row < n && col < m) {
      result.matches.emplace_back(row, col);
      det_matched[static_cast<std::size_t>(col)] = 1;
    } else if (row < n) {
      result.unmatched_predictions.push_back(row);
    }
  }
  for (int j = 0; j < m; ++j)
    if (!det_matched[static_cast<std::size_t>(j)]) result.unmatched_detections.push_back(j);
  return result;
}

void track_step(std::vector<TrackState>& tracks, const std::vector<Detection>& detections,
                const TrackerConfig& cfg, int frame_index, int& next_track_id) {
  cfg.validate();
  for (const Detection& d : detections)
    if (d.frame != frame_index)
      throw DataError("tracker: detection frame " + std::to_string(d.frame) +
                      " does not match step frame " + std::to_string(frame_index));

  // predict all active tracks; boundary leavers die before association
  std::vector<std::size_t> active;
  std::vector<BBox> predicted_boxes;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    TrackState& t = tracks[i];
    if (t.status != TrackStatus::Active) continue;
    t = kalman_predict(t, cfg.process_noise);
    const Point c = t.box().center();
    if (c.x < 0 || c.y < 0 || c.x >= cfg.image_width || c.y >= cfg.image_height) {
      t.status = TrackStatus::Dead;
      continue;
    }
    active.push_back(i);
    predicted_boxes.push_back(t.box());
  }

  std::vector<BBox> detection_boxes;
  detection_boxes.reserve(detections.size());
  for (const Detection& d : detections) detection_boxes.push_back(d.box);

  const AssociationResult assoc = associate(predicted_boxes, detection_boxes, cfg.dummy_cost);

  for (const auto& [pi, di] : assoc.matches) {
    TrackState& t = tracks[active[static_cast<std::size_t>(pi)]];
    t = kalman_correct(t, detection_boxes[static_cast<std::size_t>(di)], cfg.measurement_noise);
    t.missed_count = 0;
    t.history.push_back({frame_index, t.box(), true});
  }

  for (int pi : assoc.unmatched_predictions) {
    TrackState& t = tracks[active[static_cast<std::size_t>(pi)]];
    t.history.push_back({frame_index, t.box(), false});
    if (++t.missed_count >= cfg.alpha) t.status = TrackStatus::Dead;
  }

  for (int di : assoc.unmatched_detections) {
    const BBox& b = detection_boxes[static_cast<std::size_t>(di)];
    TrackState t;
    t.id = next_track_id++;
    t.state << b.x1, b.y1, 0.0, 0.0, b.x2, b.y2, 0.0, 0.0;
    for (int k = 0; k < 8; ++k)
      t.covariance(k, k) = cfg.initial_covariance[static_cast<std::size_t>(k)];
    t.missed_count = 0;
    t.history.push_back({frame_index, b, true});
    tracks.push_back(std::move(t));
  }
}

std::vector<TrackState> track_sequence(const std::vector<std::vector<Detection>>& per_frame,
                                       const TrackerConfig& cfg) {
  cfg.validate();
  std::vector<TrackState> tracks;
  int next_id = 1;
  for (std::size_t f = 0; f < per_frame.size(); ++f)
    track_step(tracks, per_frame[f], cfg, static_cast<int>(f), next_id);
  return tracks;
}

std::vector<TrackRecord> tracks_to_records(const std::vector<TrackState>& tracks) {
  std::vector<TrackRecord> records;
  for (const TrackState& t : tracks)
    for (const TrackEntry& e : t.history)
      records.push_back({t.id, e.frame, e.box, e.associated ? 1.0 : 0.0});
  return records;
}

}  // namespace fibertrack
