#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fibertrack/ellipse.hpp"
#include "fibertrack/geometry.hpp"
#include "fibertrack/image.hpp"

namespace fibertrack {

// Synthetic serial-section benchmark. Fibers are near-vertical 3D tubes whose
// cross-sections render as dark filled ellipses on a bright matrix; a subset
// of frames is degraded with local defocus blur discs and dark stain blobs.
struct SynthConfig {
  int width = 256;
  int height = 256;
  int num_frames = 25;
  int num_fibers = 40;
  double mean_radius = 6.0;
  double radius_sd = 1.0;
  double max_drift_velocity = 1.2;      // pixels/frame
  double degradation_frame_fraction = 0.3;
  std::array<double, 2> blur_disc_radius_range = {18.0, 30.0};
  std::array<double, 2> stain_blob_radius_range = {22.0, 36.0};
  double stain_intensity_offset = 95.0;  // gray levels subtracted inside a stain
  double noise_sd = 6.0;
  double min_center_separation = 26.0;
  double fiber_gray = 90.0;
  double background_gray = 200.0;
  uint64_t rng_seed = 1;

  void validate() const;  // throws DataError on inconsistent values
};

struct GtEntry {
  int fiber_id = 0;
  BBox box;
};

struct SequenceDataset {
  int width = 0;
  int height = 0;
  std::vector<Image> frames;
  std::vector<std::vector<GtEntry>> gt_boxes;  // may be empty for imported real data
  std::vector<bool> degraded_flags;

  int num_frames() const { return static_cast<int>(frames.size()); }
  bool has_gt() const;
  PseudoGT gt_as_boxes() const;
};

// Deterministic given config.rng_seed; the thread count never changes the
// output. Throws DataError if fibers cannot be placed at the requested
// separation after bounded retries.
SequenceDataset generate(const SynthConfig& config, int threads = 1);

// Layout: frame_%04d.pgm per frame, gt_tracks.txt in the track record format
// (fiber id as track id, score 1), degraded.txt with one 0/1 flag per line.
void export_dataset(const SequenceDataset& dataset, const std::filesystem::path& directory);
SequenceDataset import_dataset(const std::filesystem::path& directory);

}  // namespace fibertrack
