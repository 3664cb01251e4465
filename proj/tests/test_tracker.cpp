#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "fibertrack/common.hpp"
#include "fibertrack/tracker.hpp"
#include "oracles.hpp"

using namespace fibertrack;

namespace {

TrackerConfig test_config() {
  TrackerConfig cfg;
  cfg.image_width = 200;
  cfg.image_height = 200;
  return cfg;
}

TrackState make_track(const BBox& b) {
  TrackState t;
  t.id = 1;
  t.state << b.x1, b.y1, 0, 0, b.x2, b.y2, 0, 0;
  return t;
}

Detection det(int frame, double cx, double cy, double half = 5.0) {
  return {frame, {cx - half, cy - half, cx + half, cy + half}, 1.0};
}

}  // namespace

TEST_CASE("kalman_predict: linear model") {
  TrackState t = make_track({0, 0, 10, 10});

  SUBCASE("zero velocity leaves positions unchanged") {
    const TrackState p = kalman_predict(t, 1.0);
    CHECK(p.state(0) == 0.0);
    CHECK(p.state(5) == 10.0);
  }

  SUBCASE("velocities shift both corners") {
    t.state(2) = 1.0;
    t.state(3) = 2.0;
    t.state(6) = 1.0;
    t.state(7) = 2.0;
    const TrackState p = kalman_predict(t, 1.0);
    CHECK(p.state(0) == doctest::Approx(1.0));
    CHECK(p.state(1) == doctest::Approx(2.0));
    CHECK(p.state(4) == doctest::Approx(11.0));
    CHECK(p.state(5) == doctest::Approx(12.0));
  }

  SUBCASE("zero covariance becomes Q") {
    const TrackState p = kalman_predict(t, 2.5);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        CHECK(p.covariance(i, j) == doctest::Approx(i == j ? 2.5 : 0.0));
  }
}

TEST_CASE("kalman_correct: limiting cases") {
  SUBCASE("fully confident prior ignores the measurement") {
    TrackState t = make_track({0, 0, 10, 10});
    const TrackState c = kalman_correct(t, {5, 5, 15, 15}, 4.0);
    for (int i = 0; i < 8; ++i) CHECK(c.state(i) == doctest::Approx(t.state(i)).epsilon(1e-12));
  }

  SUBCASE("near-zero measurement noise snaps positions to the measurement") {
    TrackState t = make_track({0, 0, 10, 10});
    t.covariance = StateCovariance::Identity() * 10.0;
    const TrackState c = kalman_correct(t, {5, 6, 15, 16}, 1e-9);
    CHECK(c.state(0) == doctest::Approx(5.0).epsilon(1e-3));
    CHECK(c.state(1) == doctest::Approx(6.0).epsilon(1e-3));
    CHECK(c.state(4) == doctest::Approx(15.0).epsilon(1e-3));
    CHECK(c.state(5) == doctest::Approx(16.0).epsilon(1e-3));
  }
}

TEST_CASE("kalman_correct matches the textbook oracle on randomized updates") {
  Rng rng(321);
  for (int trial = 0; trial < 200; ++trial) {
    TrackState t;
    for (int i = 0; i < 8; ++i) t.state(i) = rng.uniform(-50.0, 50.0);
    // random well-conditioned SPD covariance: A A^T + I
    Eigen::Matrix<double, 8, 8> a;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) a(i, j) = rng.uniform(-2.0, 2.0);
    t.covariance = a * a.transpose() + StateCovariance::Identity();

    const double r = rng.uniform(0.5, 10.0);
    const BBox z{rng.uniform(-40.0, 40.0), rng.uniform(-40.0, 40.0), rng.uniform(50.0, 90.0),
                 rng.uniform(50.0, 90.0)};

    const TrackState c = kalman_correct(t, z, r);

    std::vector<double> state(8);
    oracles::Mat p = oracles::zeros(8, 8);
    for (int i = 0; i < 8; ++i) {
      state[i] = t.state(i);
      for (int j = 0; j < 8; ++j) p[i][j] = t.covariance(i, j);
    }
    const auto ref = oracles::kalman_correct_oracle(state, p, {z.x1, z.y1, z.x2, z.y2}, r);

    for (int i = 0; i < 8; ++i)
      CHECK(c.state(i) == doctest::Approx(ref.state[i]).epsilon(1e-9));
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        CHECK(c.covariance(i, j) ==
              doctest::Approx(ref.covariance[i][j]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("covariance stays symmetric PSD through predict/correct chains") {
  Rng rng(55);
  TrackState t = make_track({10, 10, 30, 30});
  for (int k = 0; k < 8; ++k) t.covariance(k, k) = 10.0;
  for (int step = 0; step < 50; ++step) {
    t = kalman_predict(t, 1.0);
    if (step % 3 != 2) {
      const double cx = rng.uniform(10.0, 40.0);
      const double cy = rng.uniform(10.0, 40.0);
      t = kalman_correct(t, {cx, cy, cx + 20, cy + 20}, 4.0);
    }
    CHECK((t.covariance - t.covariance.transpose()).norm() < 1e-9);
    const Eigen::SelfAdjointEigenSolver<StateCovariance> es(t.covariance);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("associate: dummy gating") {
  SUBCASE("close pair is matched") {
    const auto r = associate({{5, 5, 15, 15}}, {{7, 5, 17, 15}}, 100.0);
    REQUIRE(r.matches.size() == 1);
    CHECK(r.matches[0] == std::pair<int, int>{0, 0});
    CHECK(r.unmatched_predictions.empty());
    CHECK(r.unmatched_detections.empty());
  }

  SUBCASE("pair 300 px apart goes through the dummy route (200 < 300)") {
    const auto r = associate({{0, 0, 10, 10}}, {{300, 0, 310, 10}}, 100.0);
    CHECK(r.matches.empty());
    REQUIRE(r.unmatched_predictions.size() == 1);
    REQUIRE(r.unmatched_detections.size() == 1);
  }

  SUBCASE("no detections leaves all predictions unmatched") {
    const auto r = associate({{0, 0, 10, 10}, {50, 50, 60, 60}}, {}, 100.0);
    CHECK(r.matches.empty());
    CHECK(r.unmatched_predictions.size() == 2);
  }

  SUBCASE("matched pair set is invariant to detection permutation") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<BBox> preds, dets;
      for (int i = 0; i < 5; ++i) {
        const double x = rng.uniform(0.0, 150.0), y = rng.uniform(0.0, 150.0);
        preds.push_back({x, y, x + 10, y + 10});
        const double dx = rng.uniform(0.0, 150.0), dy = rng.uniform(0.0, 150.0);
        dets.push_back({dx, dy, dx + 10, dy + 10});
      }
      const auto base = associate(preds, dets, 100.0);
      std::vector<BBox> reversed(dets.rbegin(), dets.rend());
      const auto perm = associate(preds, reversed, 100.0);
      REQUIRE(base.matches.size() == perm.matches.size());
      const int m = static_cast<int>(dets.size());
      for (std::size_t k = 0; k < base.matches.size(); ++k) {
        bool found = false;
        for (const auto& [pi, di] : perm.matches)
          if (pi == base.matches[k].first && m - 1 - di == base.matches[k].second) found = true;
        CHECK(found);
      }
    }
  }
}

TEST_CASE("track_step scenarios with alpha = 5") {
  TrackerConfig cfg = test_config();

  SUBCASE("k clean constant-velocity fibers give k fully associated tracks") {
    std::vector<std::vector<Detection>> frames(10);
    for (int f = 0; f < 10; ++f)
      for (int k = 0; k < 3; ++k) frames[f].push_back(det(f, 20.0 + 50.0 * k + 1.5 * f, 30.0 + f));
    const auto tracks = track_sequence(frames, cfg);
    REQUIRE(tracks.size() == 3);
    for (const auto& t : tracks) {
      CHECK(t.history.size() == 10);
      for (const auto& e : t.history) CHECK(e.associated);
    }
  }

  SUBCASE("single middle-frame miss is bridged by a prediction, no new id") {
    std::vector<std::vector<Detection>> frames(9);
    for (int f = 0; f < 9; ++f)
      if (f != 4) frames[f].push_back(det(f, 50.0 + 2.0 * f, 60.0));
    const auto tracks = track_sequence(frames, cfg);
    REQUIRE(tracks.size() == 1);
    const auto& h = tracks[0].history;
    REQUIRE(h.size() == 9);
    int unassociated = 0;
    for (const auto& e : h) unassociated += e.associated ? 0 : 1;
    CHECK(unassociated == 1);
    CHECK_FALSE(h[4].associated);
    // the prediction stays close to the true (hidden) position
    CHECK(std::fabs(h[4].box.center().x - (50.0 + 8.0)) < 3.0);
    CHECK(tracks[0].status == TrackStatus::Active);
  }

  SUBCASE("one-frame spurious detection accumulates alpha predictions then dies") {
    std::vector<std::vector<Detection>> frames(12);
    for (int f = 0; f < 12; ++f) frames[f].push_back(det(f, 40.0, 40.0));  // persistent fiber
    frames[2].push_back(det(2, 120.0, 120.0));                             // transient FP
    const auto tracks = track_sequence(frames, cfg);
    REQUIRE(tracks.size() == 2);
    const auto& fp_track = tracks[1];
    CHECK(fp_track.status == TrackStatus::Dead);
    REQUIRE(fp_track.history.size() == 6);  // 1 detection + alpha predictions
    CHECK(fp_track.history[0].associated);
    for (std::size_t i = 1; i < fp_track.history.size(); ++i)
      CHECK_FALSE(fp_track.history[i].associated);
  }

  SUBCASE("track dies when its prediction leaves the image") {
    std::vector<std::vector<Detection>> frames(12);
    // fast fiber heading out of the right edge; detections stop at frame 5
    for (int f = 0; f < 6; ++f) frames[f].push_back(det(f, 150.0 + 8.0 * f, 100.0));
    const auto tracks = track_sequence(frames, cfg);
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].status == TrackStatus::Dead);
    // no history entry may lie at or beyond the boundary used for the death test
    for (const auto& e : tracks[0].history) CHECK(e.box.center().x < cfg.image_width);
  }
}

TEST_CASE("track histories are contiguous and unique per frame; ids deterministic") {
  TrackerConfig cfg = test_config();
  Rng rng(77);
  std::vector<std::vector<Detection>> frames(15);
  for (int f = 0; f < 15; ++f) {
    for (int k = 0; k < 6; ++k)
      if (rng.uniform() > 0.2)
        frames[f].push_back(det(f, 25.0 + 28.0 * k + 0.5 * f, 100.0 + (k % 3) * 30.0));
  }
  const auto tracks = track_sequence(frames, cfg);
  const auto again = track_sequence(frames, cfg);
  REQUIRE(tracks.size() == again.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    CHECK(tracks[i].id == again[i].id);
    CHECK(tracks[i].history.size() == again[i].history.size());
    REQUIRE(!tracks[i].history.empty());
    for (std::size_t e = 1; e < tracks[i].history.size(); ++e)
      CHECK(tracks[i].history[e].frame == tracks[i].history[e - 1].frame + 1);
  }

  CHECK(track_sequence(std::vector<std::vector<Detection>>(8), cfg).empty());
}

TEST_CASE("noise-free constant-velocity input converges to sub-pixel predictions") {
  TrackerConfig cfg = test_config();
  std::vector<std::vector<Detection>> frames(10);
  for (int f = 0; f < 10; ++f) frames[f].push_back(det(f, 30.0 + 3.0 * f, 40.0 + 1.0 * f));
  const auto tracks = track_sequence(frames, cfg);
  REQUIRE(tracks.size() == 1);

  // after >= 5 corrections, the one-step-ahead prediction lands within 0.5 px
  TrackState t = tracks[0];
  const TrackState pred = kalman_predict(t, cfg.process_noise);
  const Point c = pred.box().center();
  const Point expected{30.0 + 3.0 * 10, 40.0 + 1.0 * 10};
  CHECK(std::hypot(c.x - expected.x, c.y - expected.y) < 0.5);
}
