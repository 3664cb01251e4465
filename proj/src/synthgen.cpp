#include "fibertrack/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "fibertrack/common.hpp"
#include "fibertrack/io.hpp"

namespace fibertrack {

namespace {

struct Fiber {
  double start_x = 0.0, start_y = 0.0;
  double vx = 0.0, vy = 0.0;
  double perturb_amp = 0.0, perturb_freq = 0.0, phase_x = 0.0, phase_y = 0.0;
  double radius = 0.0;      // semi-minor axis
  double semi_major = 0.0;  // widened by tilt
  double theta = 0.0;       // orientation, drift direction

  Point center_at(int t) const {
    return {start_x + vx * t + perturb_amp * std::sin(perturb_freq * t + phase_x),
            start_y + vy * t + perturb_amp * std::sin(perturb_freq * t + phase_y)};
  }

  Ellipse ellipse_at(int t) const {
    const Point c = center_at(t);
    return {c.x, c.y, semi_major, radius, theta, 0};
  }
};

enum class EventKind { Stain, Blur };

struct DegradationEvent {
  EventKind kind = EventKind::Stain;
  double cx = 0.0, cy = 0.0;   // center at the first frame of the run
  double dx = 0.0, dy = 0.0;   // per-frame drift
  double radius = 0.0;
  int run_start = 0;
  int run_end = 0;  // inclusive
};

double normalize_angle(double theta) {
  const double pi = std::acos(-1.0);
  theta = std::fmod(theta, pi);
  if (theta < 0) theta += pi;
  return theta;
}

std::vector<Fiber> place_fibers(const SynthConfig& cfg, Rng& rng) {
  std::vector<Fiber> fibers;
  fibers.reserve(static_cast<std::size_t>(cfg.num_fibers));
  const double two_pi = 2.0 * std::acos(-1.0);
  const int attempts_per_fiber = 500;

  for (int i = 0; i < cfg.num_fibers; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < attempts_per_fiber && !placed; ++attempt) {
      Fiber f;
      f.radius = std::clamp(rng.normal(cfg.mean_radius, cfg.radius_sd),
                            std::max(1.5, cfg.mean_radius - 3.0 * cfg.radius_sd),
                            cfg.mean_radius + 3.0 * cfg.radius_sd);
      const double dir = rng.uniform(0.0, two_pi);
      const double speed = rng.uniform(0.2, 0.95) * cfg.max_drift_velocity;
      f.vx = speed * std::cos(dir);
      f.vy = speed * std::sin(dir);
      f.semi_major = f.radius * std::sqrt(1.0 + speed * speed);
      f.theta = speed > 1e-9 ? normalize_angle(std::atan2(f.vy, f.vx)) : 0.0;
      f.perturb_amp = std::min(0.5, 0.4 * cfg.max_drift_velocity);
      f.perturb_freq = rng.uniform(0.2, 0.5);
      f.phase_x = rng.uniform(0.0, two_pi);
      f.phase_y = rng.uniform(0.0, two_pi);

      const BBox bb0 = ellipse_min_bbox(f.ellipse_at(0));
      const double hw = 0.5 * bb0.width();
      const double hh = 0.5 * bb0.height();
      const double margin = 2.0 + f.perturb_amp;
      const double span_x = f.vx * (cfg.num_frames - 1);
      const double span_y = f.vy * (cfg.num_frames - 1);
      const double lo_x = hw + margin + std::max(0.0, -span_x);
      const double hi_x = cfg.width - hw - margin - std::max(0.0, span_x);
      const double lo_y = hh + margin + std::max(0.0, -span_y);
      const double hi_y = cfg.height - hh - margin - std::max(0.0, span_y);
      if (lo_x >= hi_x || lo_y >= hi_y) continue;
      f.start_x = rng.uniform(lo_x, hi_x);
      f.start_y = rng.uniform(lo_y, hi_y);

      bool ok = true;
      for (int t = 0; t < cfg.num_frames && ok; ++t) {
        const Ellipse et = f.ellipse_at(t);
        const BBox bt = ellipse_min_bbox(et);
        for (const Fiber& other : fibers) {
          const Ellipse eo = other.ellipse_at(t);
          const double d = std::hypot(et.cx - eo.cx, et.cy - eo.cy);
          if (d < cfg.min_center_separation || iou(bt, ellipse_min_bbox(eo)) > 0.25) {
            ok = false;
            break;
          }
        }
      }
      if (ok) {
        fibers.push_back(f);
        placed = true;
      }
    }
    if (!placed)
      throw DataError("synthgen: could not place fiber " + std::to_string(i + 1) + " of " +
                      std::to_string(cfg.num_fibers) +
                      " at min_center_separation=" + std::to_string(cfg.min_center_separation));
  }
  return fibers;
}

// Degraded frames come as contiguous runs: contaminants and defocus persist
// across neighbouring slices, drifting slowly.
void plan_degradations(const SynthConfig& cfg, Rng& rng, std::vector<bool>& degraded,
                       std::vector<DegradationEvent>& events) {
  degraded.assign(static_cast<std::size_t>(cfg.num_frames), false);
  const int target = static_cast<int>(std::lround(cfg.degradation_frame_fraction * cfg.num_frames));
  int remaining = target;
  int guard = 0;
  while (remaining > 0 && guard++ < 1000) {
    const int run_len = std::min(remaining, rng.uniform_int(4, 6));
    const int start = rng.uniform_int(0, cfg.num_frames - run_len);
    bool clash = false;
    for (int t = start; t < start + run_len; ++t)
      if (degraded[static_cast<std::size_t>(t)]) clash = true;
    if (clash) continue;
    for (int t = start; t < start + run_len; ++t) degraded[static_cast<std::size_t>(t)] = true;
    remaining -= run_len;

    const int n_events = rng.uniform_int(1, 3);
    for (int e = 0; e < n_events; ++e) {
      DegradationEvent ev;
      // The first event of a run is always a stain so that every degraded run
      // exercises the segmentation failure mode.
      ev.kind = (e == 0 || rng.uniform() < 0.5) ? EventKind::Stain : EventKind::Blur;
      const auto& rr =
          ev.kind == EventKind::Stain ? cfg.stain_blob_radius_range : cfg.blur_disc_radius_range;
      ev.radius = rng.uniform(rr[0], rr[1]);
      ev.cx = rng.uniform(ev.radius * 0.5, cfg.width - ev.radius * 0.5);
      ev.cy = rng.uniform(ev.radius * 0.5, cfg.height - ev.radius * 0.5);
      ev.dx = rng.uniform(-1.0, 1.0);
      ev.dy = rng.uniform(-1.0, 1.0);
      ev.run_start = start;
      ev.run_end = start + run_len - 1;
      events.push_back(ev);
    }
  }
  if (remaining > 0) throw InternalError("synthgen: degradation run placement did not converge");
}

void render_ellipse(FloatImage& img, const Ellipse& e, double fiber_gray) {
  const BBox bb = ellipse_min_bbox(e);
  const int x_lo = std::max(0, static_cast<int>(std::floor(bb.x1)) - 1);
  const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(bb.x2)) + 1);
  const int y_lo = std::max(0, static_cast<int>(std::floor(bb.y1)) - 1);
  const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(bb.y2)) + 1);
  const double ct = std::cos(e.theta);
  const double st = std::sin(e.theta);
  const double edge = std::min(e.a, e.b);
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      const double dx = x - e.cx;
      const double dy = y - e.cy;
      const double u = (dx * ct + dy * st) / e.a;
      const double w = (-dx * st + dy * ct) / e.b;
      const double rho = std::sqrt(u * u + w * w);
      // ~1 px anti-aliased edge via the radial coordinate
      const double coverage = std::clamp((1.0 - rho) * edge + 0.5, 0.0, 1.0);
      if (coverage <= 0.0) continue;
      double& px = img.at(x, y);
      px = px + (fiber_gray - px) * coverage;
    }
  }
}

void apply_blur_disc(FloatImage& img, double cx, double cy, double radius) {
  const double sigma = radius / 3.0;
  const FloatImage blurred = gaussian_blur(img, sigma);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      const double w = std::clamp((radius - d) / (0.15 * radius), 0.0, 1.0);
      if (w <= 0.0) continue;
      img.at(x, y) = img.at(x, y) * (1.0 - w) + blurred.at(x, y) * w;
    }
  }
}

void apply_stain(FloatImage& img, double cx, double cy, double radius, double offset) {
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      const double w = std::clamp((radius - d) / (0.2 * radius), 0.0, 1.0);
      if (w <= 0.0) continue;
      img.at(x, y) -= offset * w;
    }
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (width <= 0 || height <= 0 || num_frames <= 0 || num_fibers <= 0)
    throw DataError("synthgen: dimensions, frame and fiber counts must be positive");
  if (mean_radius <= 0 || radius_sd < 0) throw DataError("synthgen: invalid radius parameters");
  if (degradation_frame_fraction < 0.0 || degradation_frame_fraction > 1.0)
    throw DataError("synthgen: degradation_frame_fraction must be in [0,1]");
  if (max_drift_velocity < 0) throw DataError("synthgen: max_drift_velocity must be >= 0");
  if (blur_disc_radius_range[0] <= 0 || blur_disc_radius_range[1] < blur_disc_radius_range[0])
    throw DataError("synthgen: invalid blur_disc_radius_range");
  if (stain_blob_radius_range[0] <= 0 || stain_blob_radius_range[1] < stain_blob_radius_range[0])
    throw DataError("synthgen: invalid stain_blob_radius_range");
  if (noise_sd < 0) throw DataError("synthgen: noise_sd must be >= 0");
  if (min_center_separation < 2.0 * mean_radius)
    throw DataError("synthgen: min_center_separation must be >= 2*mean_radius");
  if (fiber_gray < 0 || fiber_gray > 255 || background_gray < 0 || background_gray > 255 ||
      fiber_gray >= background_gray)
    throw DataError("synthgen: need 0 <= fiber_gray < background_gray <= 255");
}

bool SequenceDataset::has_gt() const {
  return !gt_boxes.empty() &&
         std::any_of(gt_boxes.begin(), gt_boxes.end(), [](const auto& v) { return !v.empty(); });
}

PseudoGT SequenceDataset::gt_as_boxes() const {
  PseudoGT out(gt_boxes.size());
  for (std::size_t f = 0; f < gt_boxes.size(); ++f) {
    out[f].reserve(gt_boxes[f].size());
    for (const auto& e : gt_boxes[f]) out[f].push_back(e.box);
  }
  return out;
}

SequenceDataset generate(const SynthConfig& config, int threads) {
  config.validate();
  Rng master(derive_seed(config.rng_seed, 0));

  const std::vector<Fiber> fibers = place_fibers(config, master);

  std::vector<bool> degraded;
  std::vector<DegradationEvent> events;
  if (config.degradation_frame_fraction > 0.0) {
    plan_degradations(config, master, degraded, events);
  } else {
    degraded.assign(static_cast<std::size_t>(config.num_frames), false);
  }

  SequenceDataset ds;
  ds.width = config.width;
  ds.height = config.height;
  ds.frames.resize(static_cast<std::size_t>(config.num_frames));
  ds.gt_boxes.resize(static_cast<std::size_t>(config.num_frames));
  ds.degraded_flags = degraded;

  parallel_for(static_cast<std::size_t>(config.num_frames), threads, [&](std::size_t t) {
    const int frame = static_cast<int>(t);
    FloatImage canvas(config.width, config.height, config.background_gray);
    for (const Fiber& f : fibers) render_ellipse(canvas, f.ellipse_at(frame), config.fiber_gray);

    if (degraded[t]) {
      for (const DegradationEvent& ev : events) {
        if (frame < ev.run_start || frame > ev.run_end) continue;
        const int rel = frame - ev.run_start;
        const double cx = ev.cx + ev.dx * rel;
        const double cy = ev.cy + ev.dy * rel;
        if (ev.kind == EventKind::Blur)
          apply_blur_disc(canvas, cx, cy, ev.radius);
        else
          apply_stain(canvas, cx, cy, ev.radius, config.stain_intensity_offset);
      }
    }

    if (config.noise_sd > 0.0) {
      Rng noise(derive_seed(config.rng_seed, 1000 + t));
      for (double& px : canvas.px) px += noise.normal(0.0, config.noise_sd);
    }
    ds.frames[t] = quantize(canvas);

    auto& gt = ds.gt_boxes[t];
    gt.reserve(fibers.size());
    for (std::size_t i = 0; i < fibers.size(); ++i)
      gt.push_back({static_cast<int>(i) + 1, ellipse_min_bbox(fibers[i].ellipse_at(frame))});
  });

  return ds;
}

void export_dataset(const SequenceDataset& dataset, const std::filesystem::path& directory) {
  if (directory.empty()) throw DataError("export: empty directory path");
  std::filesystem::create_directories(directory);

  char name[32];
  for (int t = 0; t < dataset.num_frames(); ++t) {
    std::snprintf(name, sizeof(name), "frame_%04d.pgm", t);
    write_pgm(directory / name, dataset.frames[static_cast<std::size_t>(t)]);
  }

  std::vector<TrackRecord> records;
  for (int t = 0; t < dataset.num_frames(); ++t)
    for (const auto& e : dataset.gt_boxes[static_cast<std::size_t>(t)])
      records.push_back({e.fiber_id, t, e.box, 1.0});
  write_tracks(directory / "gt_tracks.txt", records);

  std::ofstream flags(directory / "degraded.txt", std::ios::binary);
  if (!flags) throw DataError("cannot open for writing: " + (directory / "degraded.txt").string());
  for (bool d : dataset.degraded_flags) flags << (d ? 1 : 0) << '\n';
}

SequenceDataset import_dataset(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory))
    throw DataError("dataset directory not found: " + directory.string());

  SequenceDataset ds;
  char name[32];
  for (int t = 0;; ++t) {
    std::snprintf(name, sizeof(name), "frame_%04d.pgm", t);
    const auto path = directory / name;
    if (!std::filesystem::exists(path)) break;
    ds.frames.push_back(read_pgm(path));
  }
  if (ds.frames.empty()) throw DataError("no frame_*.pgm files in " + directory.string());
  ds.width = ds.frames.front().width();
  ds.height = ds.frames.front().height();
  for (const auto& f : ds.frames)
    if (f.width() != ds.width || f.height() != ds.height)
      throw DataError("inconsistent frame sizes in " + directory.string());

  ds.gt_boxes.resize(ds.frames.size());
  const auto gt_path = directory / "gt_tracks.txt";
  if (std::filesystem::exists(gt_path)) {
    for (const TrackRecord& r : read_tracks(gt_path)) {
      if (r.frame >= static_cast<int>(ds.frames.size()))
        throw DataError(gt_path.string() + ": frame index beyond frame files");
      ds.gt_boxes[static_cast<std::size_t>(r.frame)].push_back({r.track_id, r.box});
    }
  }

  ds.degraded_flags.assign(ds.frames.size(), false);
  const auto flags_path = directory / "degraded.txt";
  if (std::filesystem::exists(flags_path)) {
    std::ifstream in(flags_path, std::ios::binary);
    std::string line;
    std::size_t t = 0;
    while (std::getline(in, line) && t < ds.frames.size()) {
      if (!line.empty()) ds.degraded_flags[t] = line[0] == '1';
      ++t;
    }
  }
  return ds;
}

}  // namespace fibertrack
