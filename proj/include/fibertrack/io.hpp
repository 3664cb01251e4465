#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fibertrack/geometry.hpp"

namespace fibertrack {

// One tracked box. `score` is 1 for associated (measured) entries and 0 for
// predicted fill-in entries.
struct TrackRecord {
  int track_id = 0;
  int frame = 0;
  BBox box;
  double score = 1.0;
};

// Shortest decimal representation that round-trips the exact double value.
std::string format_double(double v);

// Detection files: one record per line, `frame,x1,y1,x2,y2,score`.
// Track files add a leading field: `track_id,frame,x1,y1,x2,y2,score`.
// Field order is normative.
void write_detections(const std::filesystem::path& path,
                      const std::vector<std::vector<Detection>>& per_frame);
// `num_frames` <= 0 derives the frame count from the maximum index present.
std::vector<std::vector<Detection>> read_detections(const std::filesystem::path& path,
                                                    int num_frames = -1);

void write_tracks(const std::filesystem::path& path, const std::vector<TrackRecord>& records);
std::vector<TrackRecord> read_tracks(const std::filesystem::path& path);

std::vector<std::vector<Detection>> boxes_to_detections(const PseudoGT& boxes, double score = 1.0);
PseudoGT detections_to_boxes(const std::vector<std::vector<Detection>>& dets);

}  // namespace fibertrack
