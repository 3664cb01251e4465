#pragma once

#include <functional>
#include <vector>

#include "fibertrack/ellipse.hpp"
#include "fibertrack/emmpm.hpp"
#include "fibertrack/geometry.hpp"
#include "fibertrack/image.hpp"

namespace fibertrack {

struct HoughParams {
  double min_axis = 3.0;       // semi-major axis search range, pixels
  double max_axis = 15.0;
  double min_minor = 1.5;
  double bin_width = 0.5;      // minor-axis accumulator resolution
  double vote_threshold = 0.0; // absolute; 0 selects the automatic estimate
  double vote_threshold_factor = 0.5;  // fraction of the expected boundary count

  void validate() const;
};

// Pair-of-points Hough scheme on a binary mask: candidate major-axis endpoint
// pairs among boundary points propose (center, a, theta); remaining boundary
// points vote for the semi-minor axis length. Runs per connected component.
// Overlapping candidates are deduplicated by center distance against the
// larger semi-minor axis. Empty mask yields an empty list.
std::vector<Ellipse> hough_ellipses(const Image& mask, const HoughParams& params);

// Keeps boxes with area in [low_factor * mean_area, high_factor * mean_area],
// bounds inclusive.
std::vector<BBox> size_prior_filter(const std::vector<BBox>& boxes, double mean_area,
                                    double low_factor = 0.2, double high_factor = 2.0);
std::vector<Detection> size_prior_filter(const std::vector<Detection>& dets, double mean_area,
                                         double low_factor, double high_factor);

enum class InitMethod { Emmpmh, Proposals };

struct InitConfig {
  InitMethod method = InitMethod::Emmpmh;
  double size_prior_low_factor = 0.2;
  double size_prior_high_factor = 2.0;
  double proposal_nms = 0.1;
  HoughParams hough;
  EmMpmParams emmpm;

  void validate() const;
};

// Any per-image source of scored boxes can stand in for the generic-proposal
// initializer; the reference implementation below uses gradient-magnitude
// blobs.
using ProposalSource = std::function<std::vector<Detection>(const Image&, int frame)>;

std::vector<Detection> gradient_blob_proposals(const Image& image, int frame);

// Mean area of the EMMPMH detections on one sample frame; feeds the size
// prior of the proposal path and the detector's window scales.
double mean_emmpmh_area(const Image& sample_frame, const InitConfig& cfg);

// Iteration-0 pseudo ground truth: EMMPMH (segmentation + Hough + min boxes)
// or a proposal source with size-prior filtering and NMS. Deterministic given
// the configured seeds; frames are processed independently.
PseudoGT initialize_pseudo_gt(const std::vector<Image>& frames, const InitConfig& cfg,
                              int threads = 1);
PseudoGT initialize_with_proposals(const std::vector<Image>& frames, const ProposalSource& source,
                                   const InitConfig& cfg, int threads = 1);

}  // namespace fibertrack
