#include "fibertrack/loop.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fibertrack/common.hpp"
#include "fibertrack/hungarian.hpp"

namespace fibertrack {

void LoopConfig::validate() const {
  if (beta < 0) throw DataError("loop: beta must be >= 0");
  if (refine_nms < 0 || refine_nms > 1) throw DataError("loop: refine_nms must be in [0,1]");
  if (max_iterations < 1) throw DataError("loop: max_iterations must be >= 1");
  if (convergence_epsilon <= 0 || convergence_epsilon >= 1)
    throw DataError("loop: convergence_epsilon must be in (0,1)");
  init.validate();
  tracker.validate();
}

std::vector<TrackState> refine_tracks(const std::vector<TrackState>& tracks,
                                      const LoopConfig& cfg) {
  std::vector<TrackState> refined;
  refined.reserve(tracks.size());
  for (const TrackState& t : tracks) {
    TrackState copy = t;
    if (cfg.drop_trailing_timeout_predictions && t.status == TrackStatus::Dead) {
      while (!copy.history.empty() && !copy.history.back().associated) copy.history.pop_back();
    }
    if (static_cast<int>(copy.history.size()) <= cfg.beta) continue;
    refined.push_back(std::move(copy));
  }
  return refined;
}

PseudoGT tracks_to_detections(const std::vector<TrackState>& tracks, const LoopConfig& cfg,
                              int num_frames) {
  const std::vector<TrackState> refined = refine_tracks(tracks, cfg);

  std::vector<std::vector<Detection>> pooled(static_cast<std::size_t>(num_frames));
  for (const TrackState& t : refined) {
    for (const TrackEntry& e : t.history) {
      if (e.frame < 0 || e.frame >= num_frames) continue;
      const Point c = e.box.center();
      if (c.x < 0 || c.y < 0 || c.x >= cfg.tracker.image_width || c.y >= cfg.tracker.image_height)
        continue;
      pooled[static_cast<std::size_t>(e.frame)].push_back(
          {e.frame, e.box, e.associated ? 1.0 : 0.5});
    }
  }

  PseudoGT out(static_cast<std::size_t>(num_frames));
  for (std::size_t f = 0; f < pooled.size(); ++f) {
    const auto kept = nms(pooled[f], cfg.refine_nms);
    out[f].reserve(kept.size());
    for (const Detection& d : kept) out[f].push_back(d.box);
  }
  return out;
}

PseudoGT update_pseudo_gt(const PseudoGT& gp, PseudoGT refined) {
  if (gp.size() != refined.size())
    throw DataError("loop: pseudo-GT frame counts differ in update");
  return refined;
}

double pseudo_gt_delta(const PseudoGT& a, const PseudoGT& b, double iou_threshold) {
  if (a.size() != b.size()) throw DataError("loop: pseudo-GT frame counts differ in delta");
  long matched = 0;
  long total_a = 0;
  long total_b = 0;
  for (std::size_t f = 0; f < a.size(); ++f) {
    total_a += static_cast<long>(a[f].size());
    total_b += static_cast<long>(b[f].size());
    if (a[f].empty() || b[f].empty()) continue;
    std::vector<FrameBoxes> da{a[f]};
    std::vector<FrameBoxes> db{b[f]};
    const DetectionMetrics m = detection_metrics(da, db, iou_threshold);
    matched += m.tp;
  }
  const long total = total_a + total_b;
  if (total == 0) return 0.0;
  const long unmatched = (total_a - matched) + (total_b - matched);
  return static_cast<double>(unmatched) / static_cast<double>(total);
}

namespace {

std::vector<TrackRecord> gt_to_records(const SequenceDataset& ds) {
  std::vector<TrackRecord> records;
  for (int f = 0; f < ds.num_frames(); ++f)
    for (const GtEntry& e : ds.gt_boxes[static_cast<std::size_t>(f)])
      records.push_back({e.fiber_id, f, e.box, 1.0});
  return records;
}

// metrics over the subset of frames selected by `flags == value`
DetectionMetrics subset_metrics(const PseudoGT& dets, const PseudoGT& gt,
                                const std::vector<bool>& flags, bool value) {
  std::vector<FrameBoxes> sd, sg;
  for (std::size_t f = 0; f < dets.size(); ++f) {
    if (f < flags.size() && flags[f] == value) {
      sd.push_back(dets[f]);
      sg.push_back(gt[f]);
    }
  }
  if (sd.empty()) return {};
  return detection_metrics(sd, sg, 0.5);
}

void fill_gt_metrics(IterationReport& report, const SequenceDataset& dataset,
                     const PseudoGT& method_dets, const std::vector<TrackState>& refined_tracks) {
  if (!dataset.has_gt()) return;
  const PseudoGT gt = dataset.gt_as_boxes();
  report.has_detection_metrics = true;
  report.detection_all = detection_metrics(method_dets, gt, 0.5);
  report.detection_degraded = subset_metrics(method_dets, gt, dataset.degraded_flags, true);
  report.detection_clean = subset_metrics(method_dets, gt, dataset.degraded_flags, false);
  report.has_mot = true;
  report.mot = mot_metrics(tracks_to_records(refined_tracks), gt_to_records(dataset));
}

double mean_box_area(const PseudoGT& gp) {
  double sum = 0.0;
  long n = 0;
  for (const auto& frame : gp)
    for (const BBox& b : frame) {
      sum += b.area();
      ++n;
    }
  if (n == 0) throw DataError("loop: pseudo ground truth is empty on every frame");
  return sum / static_cast<double>(n);
}

void persist_iteration(const std::filesystem::path& out_dir, int iteration,
                       const std::vector<std::vector<Detection>>& detections,
                       const std::vector<TrackState>& refined_tracks, const PseudoGT& gp,
                       const DetectorModel* model, const IterationReport& report) {
  if (out_dir.empty()) return;
  const auto dir = out_dir / ("iter_" + std::to_string(iteration));
  std::filesystem::create_directories(dir);
  write_detections(dir / "detections.txt", detections);
  write_tracks(dir / "tracks.txt", tracks_to_records(refined_tracks));
  write_detections(dir / "pseudo_gt.txt", boxes_to_detections(gp));
  if (model != nullptr && model->trained()) save_model(*model, dir / "model.bin");
  write_iteration_report(dir / "report.txt", report);
}

}  // namespace

void write_iteration_report(const std::filesystem::path& path, const IterationReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  os << "iteration " << report.iteration << '\n';
  os << "converged " << (report.converged ? 1 : 0) << '\n';
  os << "pseudo_gt_delta " << format_double(report.pseudo_gt_delta) << '\n';
  long total = 0;
  for (int c : report.per_frame_counts) total += c;
  os << "boxes_total " << total << '\n';
  os << "per_frame_counts";
  for (int c : report.per_frame_counts) os << ' ' << c;
  os << '\n';
  if (report.has_detection_metrics) {
    os << "[detection_all]\n";
    print_detection_report(os, report.detection_all, false);
    if (report.detection_degraded.frames > 0) {
      os << "[detection_degraded_frames]\n";
      print_detection_report(os, report.detection_degraded, false);
    }
    if (report.detection_clean.frames > 0) {
      os << "[detection_clean_frames]\n";
      print_detection_report(os, report.detection_clean, false);
    }
  }
  if (report.has_raw_detector_metrics) {
    os << "[detector_raw]\n";
    print_detection_report(os, report.raw_detector, false);
  }
  if (report.has_mot) {
    os << "[tracking]\n";
    print_mot_report(os, report.mot, MotConfig{}, false);
  }
}

std::vector<std::vector<Detection>> detect_single_images(const DetectorModel& model,
                                                         const std::vector<Image>& images,
                                                         int threads) {
  std::vector<std::vector<Detection>> out(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    out[i] = detect(model, images[i], static_cast<int>(i));
  });
  return out;
}

LoopResult run_algorithm1(const SequenceDataset& dataset, const LoopConfig& cfg,
                          const std::filesystem::path& out_dir) {
  LoopConfig config = cfg;
  config.tracker.image_width = dataset.width;
  config.tracker.image_height = dataset.height;
  config.validate();
  const int frames = dataset.num_frames();
  if (frames < config.tracker.alpha + config.beta)
    throw DataError("loop: sequence needs at least alpha+beta=" +
                    std::to_string(config.tracker.alpha + config.beta) + " frames, got " +
                    std::to_string(frames));
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  LoopResult result;

  // Iteration 0: the raw initialization is the baseline pseudo ground truth.
  PseudoGT gp = initialize_pseudo_gt(dataset.frames, config.init, config.threads);
  {
    const auto init_dets = boxes_to_detections(gp);
    const auto init_tracks = track_sequence(init_dets, config.tracker);
    const auto refined0 = refine_tracks(init_tracks, config);
    IterationReport report;
    report.iteration = 0;
    for (const auto& f : gp) report.per_frame_counts.push_back(static_cast<int>(f.size()));
    fill_gt_metrics(report, dataset, gp, refined0);
    persist_iteration(out_dir, 0, init_dets, refined0, gp, nullptr, report);
    result.reports.push_back(std::move(report));
  }

  DetectorModel model;
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    SamplerConfig sampler = config.sampler;
    sampler.rng_seed = derive_seed(config.rng_seed, 500 + static_cast<uint64_t>(iter));
    TrainConfig train_cfg = config.train;
    train_cfg.rng_seed = derive_seed(config.rng_seed, 900 + static_cast<uint64_t>(iter));

    try {
      // Train from scratch when no model exists yet; fine-tune afterwards.
      if (!model.trained()) {
        FeatureSpec spec = make_feature_spec(mean_box_area(gp), config.init.size_prior_low_factor,
                                             config.init.size_prior_high_factor);
        const SampleSet samples =
            sample_training_patches(dataset.frames, gp, spec, sampler, config.threads);
        model = train_detector(samples, spec, train_cfg);
      } else {
        const SampleSet samples =
            sample_training_patches(dataset.frames, gp, model.spec, sampler, config.threads);
        model = fine_tune(model, samples, train_cfg);
      }
      model.score_threshold = config.detector_score_threshold;
      model.nms_threshold = config.detector_nms;
    } catch (const DataError& e) {
      throw DataError("loop iteration " + std::to_string(iter) + " (detector): " + e.what());
    }

    std::vector<std::vector<Detection>> detections(static_cast<std::size_t>(frames));
    parallel_for(static_cast<std::size_t>(frames), config.threads, [&](std::size_t f) {
      detections[f] = detect(model, dataset.frames[f], static_cast<int>(f));
    });

    const auto tracks = track_sequence(detections, config.tracker);
    const auto refined = refine_tracks(tracks, config);
    PseudoGT refined_boxes = tracks_to_detections(tracks, config, frames);
    const double delta = pseudo_gt_delta(gp, refined_boxes);
    gp = update_pseudo_gt(gp, std::move(refined_boxes));

    IterationReport report;
    report.iteration = iter;
    for (const auto& f : gp) report.per_frame_counts.push_back(static_cast<int>(f.size()));
    report.pseudo_gt_delta = delta;
    report.converged = delta < config.convergence_epsilon;
    if (dataset.has_gt()) {
      report.has_raw_detector_metrics = true;
      report.raw_detector = detection_metrics(detections_to_boxes(detections),
                                              dataset.gt_as_boxes(), 0.5);
    }
    fill_gt_metrics(report, dataset, gp, refined);
    persist_iteration(out_dir, iter, detections, refined, gp, &model, report);

    result.converged = report.converged;
    result.reports.push_back(std::move(report));
    result.tracks = refined;

    if (result.converged) break;
  }

  result.final_detections = gp;
  result.model = std::move(model);
  return result;
}

}  // namespace fibertrack
