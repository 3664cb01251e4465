// Command-line surface for the fiber detection/tracking pipeline:
//   synth   generate a synthetic serial-section dataset with ground truth
//   run     execute the detect-track self-training loop on a dataset
//   detect  apply a saved detector model to single images (no tracking)
//   eval    detection / tracking metrics between prediction and GT files
//   render  draw boxes or tracks over the frames
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fibertrack/common.hpp"
#include "fibertrack/loop.hpp"

namespace fs = std::filesystem;
using namespace fibertrack;

namespace {

struct CliState {
  int threads = default_thread_count();
  uint64_t seed = 1;

  SynthConfig synth;
  std::string synth_out;

  LoopConfig loop;
  std::string run_dataset;
  std::string run_out;

  std::string detect_model;
  std::string detect_images;
  std::string detect_out;

  std::string eval_pred;
  std::string eval_gt;
  std::string eval_mode = "detection";
  double eval_iou = 0.5;
  MotConfig eval_mot;
  std::string eval_out;

  std::string render_dataset;
  std::string render_boxes;
  std::string render_gt;
  std::string render_out;
  double render_iou = 0.5;
};

void add_synth_options(CLI::App* cmd, CliState& st) {
  cmd->add_option("--out", st.synth_out, "Output dataset directory")
      ->envname("FIBERTRACK_OUT_DIR")
      ->required();
  cmd->add_option("--width", st.synth.width, "Image width, px");
  cmd->add_option("--height", st.synth.height, "Image height, px");
  cmd->add_option("--frames", st.synth.num_frames, "Number of frames");
  cmd->add_option("--fibers", st.synth.num_fibers, "Number of fibers");
  cmd->add_option("--mean-radius", st.synth.mean_radius, "Mean fiber radius, px");
  cmd->add_option("--radius-sd", st.synth.radius_sd, "Fiber radius standard deviation, px");
  cmd->add_option("--max-drift", st.synth.max_drift_velocity, "Max drift velocity, px/frame");
  cmd->add_option("--degraded-fraction", st.synth.degradation_frame_fraction,
                  "Fraction of degraded frames in [0,1]");
  cmd->add_option("--blur-radius-min", st.synth.blur_disc_radius_range[0], "Blur disc radius lower bound, px");
  cmd->add_option("--blur-radius-max", st.synth.blur_disc_radius_range[1], "Blur disc radius upper bound, px");
  cmd->add_option("--stain-radius-min", st.synth.stain_blob_radius_range[0], "Stain blob radius lower bound, px");
  cmd->add_option("--stain-radius-max", st.synth.stain_blob_radius_range[1], "Stain blob radius upper bound, px");
  cmd->add_option("--stain-offset", st.synth.stain_intensity_offset, "Stain darkening, gray levels");
  cmd->add_option("--noise-sd", st.synth.noise_sd, "Additive Gaussian noise sigma, gray levels");
  cmd->add_option("--min-separation", st.synth.min_center_separation, "Min fiber center separation, px");
  cmd->add_option("--fiber-gray", st.synth.fiber_gray, "Fiber gray level");
  cmd->add_option("--background-gray", st.synth.background_gray, "Background gray level");
}

void add_loop_options(CLI::App* cmd, CliState& st) {
  cmd->add_option("--dataset", st.run_dataset, "Dataset directory (from synth or imported)")
      ->required();
  cmd->add_option("--out", st.run_out, "Output directory for per-iteration artifacts")
      ->envname("FIBERTRACK_OUT_DIR")
      ->required();

  cmd->add_option("--init-method", [&st](const std::vector<std::string>& v) {
        if (v.front() == "emmpmh") st.loop.init.method = InitMethod::Emmpmh;
        else if (v.front() == "proposals") st.loop.init.method = InitMethod::Proposals;
        else return false;
        return true;
      },
      "Pseudo-GT initialization: emmpmh or proposals")
      ->type_name("TEXT");
  cmd->add_option("--size-prior-low", st.loop.init.size_prior_low_factor,
                  "Size prior lower factor on the mean area");
  cmd->add_option("--size-prior-high", st.loop.init.size_prior_high_factor,
                  "Size prior upper factor on the mean area");
  cmd->add_option("--proposal-nms", st.loop.init.proposal_nms, "NMS threshold for the proposal path");

  cmd->add_option("--emmpm-classes", st.loop.init.emmpm.num_classes, "EMMPM class count");
  cmd->add_option("--emmpm-beta", st.loop.init.emmpm.potts_beta, "EMMPM Potts interaction");
  cmd->add_option("--emmpm-iterations", st.loop.init.emmpm.em_iterations, "EMMPM EM iterations");
  cmd->add_option("--emmpm-sweeps", st.loop.init.emmpm.gibbs_sweeps_per_em, "Gibbs sweeps per EM iteration");

  cmd->add_option("--hough-min-axis", st.loop.init.hough.min_axis, "Hough min semi-major axis, px");
  cmd->add_option("--hough-max-axis", st.loop.init.hough.max_axis, "Hough max semi-major axis, px");
  cmd->add_option("--hough-min-minor", st.loop.init.hough.min_minor, "Hough min semi-minor axis, px");
  cmd->add_option("--hough-bin-width", st.loop.init.hough.bin_width, "Minor-axis accumulator bin width, px");
  cmd->add_option("--hough-vote-threshold", st.loop.init.hough.vote_threshold,
                  "Absolute vote threshold (0 = automatic)");
  cmd->add_option("--hough-vote-factor", st.loop.init.hough.vote_threshold_factor,
                  "Automatic threshold as a fraction of the expected boundary count");

  cmd->add_option("--iou-positive", st.loop.sampler.iou_positive, "Positive sampling IoU threshold");
  cmd->add_option("--iou-negative", st.loop.sampler.iou_negative, "Negative sampling IoU threshold");
  cmd->add_option("--neg-per-pos", st.loop.sampler.neg_per_pos, "Negatives per positive");
  cmd->add_option("--sample-cap", st.loop.sampler.per_frame_cap, "Training sample cap per frame");
  cmd->add_option("--jitter-per-box", st.loop.sampler.jitter_per_box, "Jittered positives per pseudo-GT box");

  cmd->add_option("--epochs", st.loop.train.epochs, "Training epochs per iteration");
  cmd->add_option("--lr", st.loop.train.learning_rate, "SGD learning rate");
  cmd->add_option("--reg-weight", st.loop.train.reg_loss_weight, "Regression loss weight (lambda)");
  cmd->add_option("--batch-size", st.loop.train.batch_size, "SGD minibatch size");
  cmd->add_option("--score-threshold", st.loop.detector_score_threshold, "Detection score threshold");
  cmd->add_option("--detector-nms", st.loop.detector_nms, "Detector output NMS threshold");

  cmd->add_option("--dummy-cost", st.loop.tracker.dummy_cost, "Association dummy-node cost, px");
  cmd->add_option("--alpha", st.loop.tracker.alpha, "Track death patience, frames");
  cmd->add_option("--process-noise", st.loop.tracker.process_noise, "Kalman process noise q, px^2");
  cmd->add_option("--measurement-noise", st.loop.tracker.measurement_noise,
                  "Kalman measurement noise r, px^2");

  cmd->add_option("--beta", st.loop.beta, "Min surviving trajectory length is beta+1");
  cmd->add_option("--refine-nms", st.loop.refine_nms,
                  "Per-frame NMS threshold for tracking-as-detections");
  cmd->add_option("--max-iterations", st.loop.max_iterations, "Iteration budget");
  cmd->add_option("--epsilon", st.loop.convergence_epsilon, "Convergence threshold on the pseudo-GT delta");
  cmd->add_flag("--keep-trailing-predictions",
                [&st](std::int64_t) { st.loop.drop_trailing_timeout_predictions = false; },
                "Keep dead tracks' trailing predicted boxes (paper-literal behaviour)");
}

void echo_config(const CLI::App& app, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream os(out_dir / "config_resolved.toml", std::ios::binary);
  os << app.config_to_str(true, true);
}

int cmd_synth(const CLI::App& app, CliState& st) {
  st.synth.rng_seed = st.seed;
  const SequenceDataset ds = generate(st.synth, st.threads);
  export_dataset(ds, st.synth_out);
  echo_config(app, st.synth_out);
  int degraded = 0;
  for (bool d : ds.degraded_flags) degraded += d ? 1 : 0;
  std::cout << "dataset " << st.synth_out << "\n"
            << "frames " << ds.num_frames() << " (" << ds.width << "x" << ds.height << ")\n"
            << "fibers " << st.synth.num_fibers << "\n"
            << "degraded_frames " << degraded << "\n";
  return 0;
}

int cmd_run(const CLI::App& app, CliState& st) {
  const SequenceDataset ds = import_dataset(st.run_dataset);
  st.loop.threads = st.threads;
  st.loop.rng_seed = st.seed;
  st.loop.init.emmpm.rng_seed = derive_seed(st.seed, 11);
  std::cout << "run: frames=" << ds.num_frames() << " alpha=" << st.loop.tracker.alpha
            << " beta=" << st.loop.beta << " refine_nms=" << st.loop.refine_nms
            << " max_iterations=" << st.loop.max_iterations
            << " epsilon=" << st.loop.convergence_epsilon << " threads=" << st.threads << "\n";

  const LoopResult result = run_algorithm1(ds, st.loop, st.run_out);
  echo_config(app, st.run_out);

  const IterationReport& last = result.reports.back();
  std::cout << "iterations " << last.iteration << "\n"
            << "converged " << (result.converged ? 1 : 0) << "\n"
            << "final_pseudo_gt_delta " << format_double(last.pseudo_gt_delta) << "\n";
  if (last.has_detection_metrics)
    std::cout << "final_f_measure " << format_double(last.detection_all.f_measure) << "\n";
  if (last.has_mot) std::cout << "final_mota " << format_double(last.mot.mota) << "\n";
  return 0;
}

int cmd_detect(const CLI::App& app, CliState& st) {
  const DetectorModel model = load_model(st.detect_model);
  const SequenceDataset ds = import_dataset(st.detect_images);
  const auto detections = detect_single_images(model, ds.frames, st.threads);
  const fs::path out_path(st.detect_out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_detections(out_path, detections);
  if (out_path.has_parent_path()) echo_config(app, out_path.parent_path());
  long total = 0;
  for (const auto& f : detections) total += static_cast<long>(f.size());
  std::cout << "images " << ds.num_frames() << "\ndetections " << total << "\n";
  return 0;
}

int cmd_eval(const CLI::App& app, CliState& st) {
  (void)app;
  std::ostringstream report;
  if (st.eval_mode == "detection") {
    auto read_boxes = [](const std::string& path, int frames) {
      // accept either the 6-field detection or 7-field track format
      try {
        return detections_to_boxes(read_detections(path, frames));
      } catch (const DataError&) {
        const auto records = read_tracks(path);
        int max_frame = -1;
        for (const auto& r : records) max_frame = std::max(max_frame, r.frame);
        const int n = frames > 0 ? frames : max_frame + 1;
        PseudoGT boxes(static_cast<std::size_t>(std::max(n, 0)));
        for (const auto& r : records) boxes[static_cast<std::size_t>(r.frame)].push_back(r.box);
        return boxes;
      }
    };
    PseudoGT gt = read_boxes(st.eval_gt, -1);
    PseudoGT pred = read_boxes(st.eval_pred, static_cast<int>(gt.size()));
    if (pred.size() < gt.size()) pred.resize(gt.size());
    const DetectionMetrics m = detection_metrics(pred, gt, st.eval_iou);
    print_detection_report(report, m, true);
  } else if (st.eval_mode == "tracking") {
    const auto pred = read_tracks(st.eval_pred);
    const auto gt = read_tracks(st.eval_gt);
    const MotMetrics m = mot_metrics(pred, gt, st.eval_mot);
    print_mot_report(report, m, st.eval_mot, true);
  } else {
    throw CLI::ValidationError("--mode must be 'detection' or 'tracking'");
  }

  std::cout << report.str();
  if (!st.eval_out.empty()) {
    std::ofstream os(st.eval_out, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + st.eval_out);
    os << report.str();
  }
  return 0;
}

int cmd_render(const CLI::App& app, CliState& st) {
  (void)app;
  const SequenceDataset ds = import_dataset(st.render_dataset);
  fs::create_directories(st.render_out);

  // tracks get a per-id color; detections are green
  auto id_color = [](int id) {
    const uint64_t h = splitmix64(static_cast<uint64_t>(id));
    return std::array<uint8_t, 3>{static_cast<uint8_t>(64 + (h & 0x7f)),
                                  static_cast<uint8_t>(64 + ((h >> 8) & 0x7f)),
                                  static_cast<uint8_t>(64 + ((h >> 16) & 0x7f))};
  };

  std::vector<std::vector<TrackRecord>> per_frame(static_cast<std::size_t>(ds.num_frames()));
  bool track_mode = false;
  try {
    for (const auto& frame_dets : read_detections(st.render_boxes, ds.num_frames()))
      for (const auto& d : frame_dets)
        per_frame[static_cast<std::size_t>(d.frame)].push_back({-1, d.frame, d.box, d.score});
  } catch (const DataError&) {
    track_mode = true;
    for (const auto& r : read_tracks(st.render_boxes)) {
      if (r.frame >= ds.num_frames()) continue;
      per_frame[static_cast<std::size_t>(r.frame)].push_back(r);
    }
  }

  const bool compare = !st.render_gt.empty();
  PseudoGT gt;
  if (compare) gt = detections_to_boxes(read_detections(st.render_gt, ds.num_frames()));

  char name[32];
  for (int f = 0; f < ds.num_frames(); ++f) {
    RgbImage canvas = to_rgb(ds.frames[static_cast<std::size_t>(f)]);
    const auto& boxes = per_frame[static_cast<std::size_t>(f)];
    if (!compare) {
      for (const auto& r : boxes) {
        const auto c = track_mode ? id_color(r.track_id) : std::array<uint8_t, 3>{0, 200, 0};
        draw_box(canvas, r.box.x1, r.box.y1, r.box.x2, r.box.y2, c[0], c[1], c[2]);
      }
    } else {
      // matched: green; false positive: red; false negative: blue
      FrameBoxes pred;
      for (const auto& r : boxes) pred.push_back(r.box);
      std::vector<FrameBoxes> dv{pred};
      std::vector<FrameBoxes> gv{f < static_cast<int>(gt.size()) ? gt[static_cast<std::size_t>(f)]
                                                                 : FrameBoxes{}};
      const DetectionMetrics m = detection_metrics(dv, gv, st.render_iou);
      // recompute the per-box verdicts with a second matching pass
      std::vector<char> pred_matched(pred.size(), 0), gt_matched(gv[0].size(), 0);
      for (std::size_t i = 0; i < pred.size(); ++i)
        for (std::size_t j = 0; j < gv[0].size(); ++j)
          if (!pred_matched[i] && !gt_matched[j] && iou(pred[i], gv[0][j]) >= st.render_iou) {
            pred_matched[i] = 1;
            gt_matched[j] = 1;
          }
      (void)m;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto& b = pred[i];
        if (pred_matched[i])
          draw_box(canvas, b.x1, b.y1, b.x2, b.y2, 0, 200, 0);
        else
          draw_box(canvas, b.x1, b.y1, b.x2, b.y2, 220, 0, 0);
      }
      for (std::size_t j = 0; j < gv[0].size(); ++j) {
        if (gt_matched[j]) continue;
        const auto& b = gv[0][j];
        draw_box(canvas, b.x1, b.y1, b.x2, b.y2, 0, 0, 220);
      }
    }
    std::snprintf(name, sizeof(name), "frame_%04d.ppm", f);
    write_ppm(fs::path(st.render_out) / name, canvas);
  }
  std::cout << "rendered " << ds.num_frames() << " frames to " << st.render_out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fibertrack: unsupervised fiber detection and tracking pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a config file (INI/TOML style, # comments)");
  app.allow_config_extras(false);

  CliState st;
  app.add_option("--threads", st.threads, "Worker thread cap for frame-parallel stages")
      ->envname("FIBERTRACK_THREADS");
  app.add_option("--seed", st.seed, "Base RNG seed");

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_synth_options(synth, st);
  CLI::App* run = app.add_subcommand("run", "Run the detect-track self-training loop");
  add_loop_options(run, st);

  CLI::App* det = app.add_subcommand("detect", "Apply a saved model to images (no tracking)");
  det->add_option("--model", st.detect_model, "Model file (model.bin from a run)")->required();
  det->add_option("--images", st.detect_images, "Directory with frame_*.pgm images")->required();
  det->add_option("--out", st.detect_out, "Output detections file")
      ->envname("FIBERTRACK_OUT_DIR")
      ->required();

  CLI::App* ev = app.add_subcommand("eval", "Evaluate predictions against ground truth");
  ev->add_option("--pred", st.eval_pred, "Predicted detections/tracks file")->required();
  ev->add_option("--gt", st.eval_gt, "Ground-truth detections/tracks file")->required();
  ev->add_option("--mode", st.eval_mode, "detection or tracking");
  ev->add_option("--iou", st.eval_iou, "Detection IoU threshold");
  ev->add_option("--hit-threshold", st.eval_mot.hit_threshold, "Tracking hit threshold, px");
  ev->add_flag("--restrict-gt", st.eval_mot.restrict_to_gt,
               "Exclude hypotheses that never approach any GT (incomplete-GT protocol)");
  ev->add_option("--out", st.eval_out, "Also write the report to this file");

  CLI::App* ren = app.add_subcommand("render", "Draw boxes over the frames");
  ren->add_option("--dataset", st.render_dataset, "Dataset directory")->required();
  ren->add_option("--boxes", st.render_boxes, "Detections or tracks file")->required();
  ren->add_option("--gt", st.render_gt, "Optional GT detections file: compare mode (FP red, FN blue)");
  ren->add_option("--iou", st.render_iou, "Compare-mode IoU threshold");
  ren->add_option("--out", st.render_out, "Output directory")
      ->envname("FIBERTRACK_OUT_DIR")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(synth)) return cmd_synth(app, st);
    if (app.got_subcommand(run)) return cmd_run(app, st);
    if (app.got_subcommand(det)) return cmd_detect(app, st);
    if (app.got_subcommand(ev)) return cmd_eval(app, st);
    if (app.got_subcommand(ren)) return cmd_render(app, st);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
