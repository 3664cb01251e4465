#pragma once

#include <cstdint>
#include <vector>

#include "fibertrack/image.hpp"

namespace fibertrack {

struct LabelMap {
  int width = 0;
  int height = 0;
  int num_classes = 0;
  std::vector<uint8_t> labels;  // per-pixel class index in [0, num_classes)

  uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

struct EmMpmParams {
  int num_classes = 3;
  double potts_beta = 1.0;
  int em_iterations = 5;
  int gibbs_sweeps_per_em = 8;
  uint64_t rng_seed = 0;
  int max_restarts = 3;

  void validate() const;
};

// Unsupervised EM/MPM segmentation: Gibbs sampling of labels under per-class
// Gaussian likelihoods and a 4-neighbourhood Potts prior, alternating with
// closed-form mean/sigma updates from the sampled marginals. The returned
// label per pixel is the majority over the recorded sweeps (the last half of
// each EM iteration's Gibbs sweeps). Deterministic given rng_seed.
//
// Class means are initialized at evenly spaced intensity quantiles. If a
// class empties during the M-step the run restarts with re-jittered means, up
// to max_restarts; after that the empty class keeps its frozen parameters, so
// structureless images come back with a single dominant label.
LabelMap emmpm_segment(const Image& image, const EmMpmParams& params);

// Selects the fiber class: the class with the lowest mean intensity (fibers
// are dark on a bright matrix). Returns a 0/255 mask.
Image class_mask(const LabelMap& labelmap, const Image& image);

// Debug visualization: class index scaled to the full 8-bit range.
Image label_map_to_image(const LabelMap& labelmap);

}  // namespace fibertrack
