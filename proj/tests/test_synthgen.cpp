#include <doctest.h>

#include <filesystem>

#include "fibertrack/common.hpp"
#include "fibertrack/synthgen.hpp"
#include "oracles.hpp"

using namespace fibertrack;
namespace fs = std::filesystem;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.width = 128;
  cfg.height = 128;
  cfg.num_frames = 12;
  cfg.num_fibers = 10;
  cfg.mean_radius = 5.0;
  cfg.radius_sd = 0.8;
  cfg.min_center_separation = 22.0;
  cfg.rng_seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("same config and seed give bit-identical frames and gt") {
  const SynthConfig cfg = small_config();
  const SequenceDataset a = generate(cfg, 1);
  const SequenceDataset b = generate(cfg, 4);  // thread count must not matter
  REQUIRE(a.num_frames() == b.num_frames());
  for (int f = 0; f < a.num_frames(); ++f) {
    CHECK(a.frames[f] == b.frames[f]);
    REQUIRE(a.gt_boxes[f].size() == b.gt_boxes[f].size());
    for (std::size_t i = 0; i < a.gt_boxes[f].size(); ++i) {
      CHECK(a.gt_boxes[f][i].fiber_id == b.gt_boxes[f][i].fiber_id);
      CHECK(a.gt_boxes[f][i].box.x1 == b.gt_boxes[f][i].box.x1);
      CHECK(a.gt_boxes[f][i].box.y2 == b.gt_boxes[f][i].box.y2);
    }
  }
  CHECK(a.degraded_flags == b.degraded_flags);
}

TEST_CASE("zero degradation fraction means no degraded frames") {
  SynthConfig cfg = small_config();
  cfg.degradation_frame_fraction = 0.0;
  const SequenceDataset ds = generate(cfg);
  for (bool d : ds.degraded_flags) CHECK_FALSE(d);
}

TEST_CASE("every frame carries exactly num_fibers gt boxes; degraded count is rounded exactly") {
  SynthConfig cfg = small_config();
  cfg.degradation_frame_fraction = 0.3;  // 12 frames -> round(3.6) = 4
  const SequenceDataset ds = generate(cfg);
  for (int f = 0; f < ds.num_frames(); ++f)
    CHECK(ds.gt_boxes[f].size() == static_cast<std::size_t>(cfg.num_fibers));
  int degraded = 0;
  for (bool d : ds.degraded_flags) degraded += d ? 1 : 0;
  CHECK(degraded == 4);
}

TEST_CASE("gt invariants: drift bound, no heavy overlap, centers inside") {
  SynthConfig cfg = small_config();
  cfg.degradation_frame_fraction = 0.25;
  const SequenceDataset ds = generate(cfg);
  const double step_bound = cfg.max_drift_velocity * std::sqrt(2.0) + 1e-9;

  for (int f = 0; f < ds.num_frames(); ++f) {
    const auto& gt = ds.gt_boxes[f];
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const Point c = gt[i].box.center();
      CHECK(c.x >= 0);
      CHECK(c.y >= 0);
      CHECK(c.x < cfg.width);
      CHECK(c.y < cfg.height);
      for (std::size_t j = i + 1; j < gt.size(); ++j)
        CHECK(iou(gt[i].box, gt[j].box) <= 0.3);
    }
    if (f > 0) {
      const auto& prev = ds.gt_boxes[f - 1];
      REQUIRE(prev.size() == gt.size());
      for (std::size_t i = 0; i < gt.size(); ++i) {
        CHECK(prev[i].fiber_id == gt[i].fiber_id);
        CHECK(center_distance(prev[i].box, gt[i].box) <= step_bound);
      }
    }
  }
}

TEST_CASE("rendered dark blobs line up with the analytic gt boxes") {
  SynthConfig cfg = small_config();
  cfg.degradation_frame_fraction = 0.0;
  cfg.noise_sd = 0.0;
  const SequenceDataset ds = generate(cfg);
  const Image& img = ds.frames[0];
  const double mid = 0.5 * (cfg.fiber_gray + cfg.background_gray);

  for (const GtEntry& e : ds.gt_boxes[0]) {
    // tight pixel bbox of the dark region under this gt box (pad by 2 px)
    int min_x = 1 << 30, min_y = 1 << 30, max_x = -1, max_y = -1;
    const int x0 = std::max(0, static_cast<int>(e.box.x1) - 2);
    const int x1 = std::min(img.width() - 1, static_cast<int>(e.box.x2) + 2);
    const int y0 = std::max(0, static_cast<int>(e.box.y1) - 2);
    const int y1 = std::min(img.height() - 1, static_cast<int>(e.box.y2) + 2);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (img.at(x, y) < mid) {
          min_x = std::min(min_x, x);
          max_x = std::max(max_x, x);
          min_y = std::min(min_y, y);
          max_y = std::max(max_y, y);
        }
    REQUIRE(max_x >= 0);
    // the analytic box contains the rendered dark blob and stays tight to it;
    // the half-covered edge band leaves up to ~2 px of quantization slack at
    // the tangency points
    CHECK(min_x + 0.5 >= e.box.x1 - 0.75);
    CHECK(max_x + 0.5 <= e.box.x2 + 0.75);
    CHECK(min_y + 0.5 >= e.box.y1 - 0.75);
    CHECK(max_y + 0.5 <= e.box.y2 + 0.75);
    CHECK(min_x + 0.5 <= e.box.x1 + 2.0);
    CHECK(max_x + 0.5 >= e.box.x2 - 2.0);
    CHECK(min_y + 0.5 <= e.box.y1 + 2.0);
    CHECK(max_y + 0.5 >= e.box.y2 - 2.0);
  }
}

TEST_CASE("impossible placement is rejected with DataError") {
  SynthConfig cfg = small_config();
  cfg.width = 64;
  cfg.height = 64;
  cfg.num_fibers = 200;
  CHECK_THROWS_AS(generate(cfg), DataError);

  SynthConfig bad = small_config();
  bad.min_center_separation = 1.0;  // must be >= 2*mean_radius
  CHECK_THROWS_AS(generate(bad), DataError);
}

TEST_CASE("export/import round-trip reproduces the dataset") {
  const fs::path dir = fs::temp_directory_path() / "fibertrack_synth_roundtrip";
  fs::remove_all(dir);
  SynthConfig cfg = small_config();
  cfg.degradation_frame_fraction = 0.25;
  const SequenceDataset ds = generate(cfg);
  export_dataset(ds, dir);

  // 12 frames + gt + degraded flags
  int frame_files = 0;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".pgm") ++frame_files;
  CHECK(frame_files == ds.num_frames());
  CHECK(fs::exists(dir / "gt_tracks.txt"));

  const SequenceDataset back = import_dataset(dir);
  REQUIRE(back.num_frames() == ds.num_frames());
  CHECK(back.width == ds.width);
  CHECK(back.degraded_flags == ds.degraded_flags);
  for (int f = 0; f < ds.num_frames(); ++f) {
    CHECK(back.frames[f] == ds.frames[f]);
    REQUIRE(back.gt_boxes[f].size() == ds.gt_boxes[f].size());
    for (std::size_t i = 0; i < ds.gt_boxes[f].size(); ++i) {
      CHECK(back.gt_boxes[f][i].fiber_id == ds.gt_boxes[f][i].fiber_id);
      CHECK(back.gt_boxes[f][i].box.x1 == ds.gt_boxes[f][i].box.x1);
      CHECK(back.gt_boxes[f][i].box.y1 == ds.gt_boxes[f][i].box.y1);
      CHECK(back.gt_boxes[f][i].box.x2 == ds.gt_boxes[f][i].box.x2);
      CHECK(back.gt_boxes[f][i].box.y2 == ds.gt_boxes[f][i].box.y2);
    }
  }

  CHECK_THROWS_AS(export_dataset(ds, fs::path{}), DataError);
}
