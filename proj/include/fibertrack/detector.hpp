#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fibertrack/geometry.hpp"
#include "fibertrack/image.hpp"

namespace fibertrack {

// Window descriptor: a mean/variance-normalized resampled intensity patch
// concatenated with a gradient-orientation histogram.
struct FeatureSpec {
  int patch_size = 24;
  int orientation_bins = 8;
  std::vector<double> window_sides;  // detection scales, pixels

  int dim() const { return patch_size * patch_size + orientation_bins; }
  void validate() const;
};

// Window sides spanning the size prior [low_factor*a, high_factor*a] mapped
// to side lengths, three scales geometrically spaced.
FeatureSpec make_feature_spec(double mean_area, double low_factor = 0.2,
                              double high_factor = 2.0);

std::vector<float> extract_features(const Image& image, const BBox& box, const FeatureSpec& spec);

struct TrainingSample {
  int frame = 0;
  BBox box;
  std::vector<float> features;
  std::array<double, 4> reg_target{};  // (dx/w, dy/h, log dw, log dh); positives only
  bool positive = false;
};

struct SampleSet {
  std::vector<TrainingSample> positives;
  std::vector<TrainingSample> negatives;
};

struct SamplerConfig {
  double iou_positive = 0.7;   // candidates above: positive
  double iou_negative = 0.3;   // candidates below (against all boxes): negative
  double neg_per_pos = 3.0;
  int per_frame_cap = 256;
  int jitter_per_box = 2;
  uint64_t rng_seed = 0;
};

// Positives are the pseudo-GT boxes plus jittered copies that keep
// IoU > iou_positive with their source; negatives are drawn uniformly over
// location and scale and kept only when their best IoU against the frame's
// pseudo GT stays below iou_negative. Candidates in between belong to neither
// class and are discarded. Throws DataError when the whole sequence yields no
// positive.
SampleSet sample_training_patches(const std::vector<Image>& frames, const PseudoGT& gp,
                                  const FeatureSpec& spec, const SamplerConfig& cfg,
                                  int threads = 1);

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 0.01;
  double reg_loss_weight = 1.0;  // balance between classification and regression
  int batch_size = 32;
  uint64_t rng_seed = 0;
};

struct DetectorModel {
  static constexpr int kFormatVersion = 1;

  FeatureSpec spec;
  std::vector<double> cls_weights;
  double cls_bias = 0.0;
  std::vector<double> reg_weights;  // 4 rows, flattened
  std::array<double, 4> reg_bias{};
  double score_threshold = 0.5;
  double nms_threshold = 0.3;
  int epochs_seen = 0;
  uint64_t train_seed = 0;

  bool trained() const { return !cls_weights.empty(); }
};

// Flattened parameter block shared by training and the gradient check:
// [cls_weights(dim), cls_bias, reg_weights(4*dim), reg_bias(4)].
std::vector<double> pack_parameters(const DetectorModel& model);
void unpack_parameters(const std::vector<double>& params, DetectorModel& model);

// Mean logistic loss plus reg_loss_weight times the mean smooth-L1 regression
// loss over positives. `grad` may be null. Sample pointers allow batch views.
double loss_and_gradient(const std::vector<double>& params, int feature_dim,
                         const std::vector<const TrainingSample*>& batch, double reg_loss_weight,
                         std::vector<double>* grad);

// Minibatch SGD on the combined loss, from zero-initialized weights.
// Deterministic given cfg.rng_seed. Throws InternalError naming the epoch if
// the loss turns non-finite.
DetectorModel train_detector(const SampleSet& samples, const FeatureSpec& spec,
                             const TrainConfig& cfg);

// Same loop, warm-started from an existing model. Zero epochs returns the
// model unchanged.
DetectorModel fine_tune(const DetectorModel& model, const SampleSet& samples,
                        const TrainConfig& cfg);

// Slides windows of every configured scale at stride side/4, scores with the
// classifier, keeps windows above score_threshold, applies the box regressor
// and finishes with NMS. Pure function of (model, image).
std::vector<Detection> detect(const DetectorModel& model, const Image& image, int frame_index);

// Structured-text model file with a version tag; load rejects mismatches.
void save_model(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_model(const std::filesystem::path& path);

}  // namespace fibertrack
