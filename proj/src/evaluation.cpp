#include "fibertrack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include "fibertrack/common.hpp"
#include "fibertrack/hungarian.hpp"

namespace fibertrack {

namespace {

// Prohibitive cost for inadmissible pairs and a dummy cost that makes every
// admissible match cheaper than leaving both nodes unmatched, so maximum
// cardinality dominates and admissible costs only break ties.
constexpr double kInadmissible = 1e9;
constexpr double kDummy = 1e3;

// Maximum one-to-one matching among pairs flagged admissible, minimizing the
// summed pair cost among maximum matchings. Returns matched (row, col) pairs.
std::vector<std::pair<int, int>> admissible_matching(const CostMatrix& pair_cost,
                                                     const std::vector<std::vector<char>>& admissible) {
  const int n = static_cast<int>(pair_cost.size());
  const int m = n > 0 ? static_cast<int>(pair_cost[0].size()) : 0;
  if (n == 0 || m == 0) return {};

  const int size = n + m;
  CostMatrix cost(static_cast<std::size_t>(size),
                  std::vector<double>(static_cast<std::size_t>(size), 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          admissible[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
              ? pair_cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
              : kInadmissible;
  for (int i = 0; i < n; ++i)
    for (int j = m; j < size; ++j) cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = kDummy;
  for (int i = n; i < size; ++i)
    for (int j = 0; j < m; ++j) cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = kDummy;

  std::vector<std::pair<int, int>> matches;
  for (const auto& [row, col] : hungarian(cost))
    if (row < n && col < m && admissible[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)])
      matches.emplace_back(row, col);
  return matches;
}

}  // namespace

DetectionMetrics detection_metrics(const std::vector<FrameBoxes>& detections,
                                   const std::vector<FrameBoxes>& ground_truth,
                                   double iou_threshold) {
  if (detections.size() != ground_truth.size())
    throw DataError("detection_metrics: frame counts differ (" +
                    std::to_string(detections.size()) + " vs " +
                    std::to_string(ground_truth.size()) + ")");

  DetectionMetrics m;
  m.frames = static_cast<int>(detections.size());
  m.per_frame.resize(detections.size());

  for (std::size_t f = 0; f < detections.size(); ++f) {
    const FrameBoxes& dets = detections[f];
    const FrameBoxes& gts = ground_truth[f];
    CostMatrix cost(dets.size(), std::vector<double>(gts.size(), 0.0));
    std::vector<std::vector<char>> ok(dets.size(), std::vector<char>(gts.size(), 0));
    for (std::size_t i = 0; i < dets.size(); ++i)
      for (std::size_t j = 0; j < gts.size(); ++j) {
        const double v = iou(dets[i], gts[j]);
        if (v >= iou_threshold) {
          ok[i][j] = 1;
          cost[i][j] = 1.0 - v;  // maximize total IoU among maximum matchings
        }
      }
    const auto matches = admissible_matching(cost, ok);
    FrameCounts& fc = m.per_frame[f];
    fc.tp = static_cast<int>(matches.size());
    fc.fp = static_cast<int>(dets.size()) - fc.tp;
    fc.fn = static_cast<int>(gts.size()) - fc.tp;
    m.tp += fc.tp;
    m.fp += fc.fp;
    m.fn += fc.fn;
  }

  m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp)
                                : (m.fn == 0 ? 1.0 : 0.0);
  m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn)
                             : (m.fp == 0 ? 1.0 : 0.0);
  m.f_measure = m.precision + m.recall > 0
                    ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                    : 0.0;
  if (m.frames > 0) {
    m.nfp_per_image = static_cast<double>(m.fp) / m.frames;
    m.nfn_per_image = static_cast<double>(m.fn) / m.frames;
  }
  return m;
}

namespace {

struct MotEntry {
  int id = 0;
  Point center;
};

using FrameMap = std::map<int, std::vector<MotEntry>>;

FrameMap index_by_frame(const std::vector<TrackRecord>& records, const char* what) {
  FrameMap by_frame;
  std::set<std::pair<int, int>> seen;
  for (const TrackRecord& r : records) {
    if (!seen.insert({r.track_id, r.frame}).second)
      throw DataError(std::string("mot_metrics: duplicate (") + what + " id " +
                      std::to_string(r.track_id) + ", frame " + std::to_string(r.frame) +
                      ") entry");
    by_frame[r.frame].push_back({r.track_id, r.box.center()});
  }
  // deterministic processing order
  for (auto& [frame, list] : by_frame)
    std::sort(list.begin(), list.end(),
              [](const MotEntry& a, const MotEntry& b) { return a.id < b.id; });
  return by_frame;
}

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

MotMetrics mot_metrics(const std::vector<TrackRecord>& hypotheses,
                       const std::vector<TrackRecord>& ground_truth, const MotConfig& cfg) {
  FrameMap gt_by_frame = index_by_frame(ground_truth, "gt");
  FrameMap hyp_by_frame = index_by_frame(hypotheses, "hypothesis");
  if (gt_by_frame.empty()) throw DataError("mot_metrics: empty ground truth");

  if (cfg.restrict_to_gt) {
    // drop hypothesis trajectories that never approach any GT position
    std::set<int> related;
    for (const auto& [frame, hyps] : hyp_by_frame) {
      const auto it = gt_by_frame.find(frame);
      if (it == gt_by_frame.end()) continue;
      for (const MotEntry& hyp : hyps)
        for (const MotEntry& gt : it->second)
          if (dist(hyp.center, gt.center) <= cfg.hit_threshold) related.insert(hyp.id);
    }
    for (auto& [frame, hyps] : hyp_by_frame) {
      std::vector<MotEntry> kept;
      for (const MotEntry& h : hyps)
        if (related.count(h.id)) kept.push_back(h);
      hyps = std::move(kept);
    }
  }

  MotMetrics m;
  std::map<int, int> correspondence;      // gt id -> hyp id, carried frame to frame
  std::map<int, int> last_matched_hyp;    // gt id -> hyp id at its last matched frame
  std::map<int, long> gt_present, gt_hit;

  std::set<int> frames;
  for (const auto& [f, v] : gt_by_frame) frames.insert(f);
  for (const auto& [f, v] : hyp_by_frame) frames.insert(f);

  for (int frame : frames) {
    static const std::vector<MotEntry> kEmpty;
    const auto git = gt_by_frame.find(frame);
    const auto hit = hyp_by_frame.find(frame);
    const std::vector<MotEntry>& gts = git != gt_by_frame.end() ? git->second : kEmpty;
    const std::vector<MotEntry>& hyps = hit != hyp_by_frame.end() ? hit->second : kEmpty;

    for (const MotEntry& g : gts) ++gt_present[g.id];

    std::vector<char> gt_used(gts.size(), 0);
    std::vector<char> hyp_used(hyps.size(), 0);
    int matches = 0;
    int switches = 0;

    // keep persisting correspondences that are still close enough
    std::map<int, int> next_correspondence;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      const auto corr = correspondence.find(gts[gi].id);
      if (corr == correspondence.end()) continue;
      for (std::size_t hi = 0; hi < hyps.size(); ++hi) {
        if (hyp_used[hi] || hyps[hi].id != corr->second) continue;
        if (dist(gts[gi].center, hyps[hi].center) <= cfg.hit_threshold) {
          gt_used[gi] = 1;
          hyp_used[hi] = 1;
          next_correspondence[gts[gi].id] = hyps[hi].id;
          last_matched_hyp[gts[gi].id] = hyps[hi].id;
          ++gt_hit[gts[gi].id];
          ++matches;
        }
        break;
      }
    }

    // Hungarian over the remainder, admitting only pairs within threshold
    std::vector<std::size_t> free_gt, free_hyp;
    for (std::size_t gi = 0; gi < gts.size(); ++gi)
      if (!gt_used[gi]) free_gt.push_back(gi);
    for (std::size_t hi = 0; hi < hyps.size(); ++hi)
      if (!hyp_used[hi]) free_hyp.push_back(hi);

    if (!free_gt.empty() && !free_hyp.empty()) {
      CostMatrix cost(free_gt.size(), std::vector<double>(free_hyp.size(), 0.0));
      std::vector<std::vector<char>> ok(free_gt.size(), std::vector<char>(free_hyp.size(), 0));
      for (std::size_t a = 0; a < free_gt.size(); ++a)
        for (std::size_t b = 0; b < free_hyp.size(); ++b) {
          const double d = dist(gts[free_gt[a]].center, hyps[free_hyp[b]].center);
          if (d <= cfg.hit_threshold) {
            ok[a][b] = 1;
            cost[a][b] = d;
          }
        }
      for (const auto& [a, b] : admissible_matching(cost, ok)) {
        const MotEntry& g = gts[free_gt[static_cast<std::size_t>(a)]];
        const MotEntry& h = hyps[free_hyp[static_cast<std::size_t>(b)]];
        gt_used[free_gt[static_cast<std::size_t>(a)]] = 1;
        hyp_used[free_hyp[static_cast<std::size_t>(b)]] = 1;
        const auto last = last_matched_hyp.find(g.id);
        if (last != last_matched_hyp.end() && last->second != h.id) ++switches;
        next_correspondence[g.id] = h.id;
        last_matched_hyp[g.id] = h.id;
        ++gt_hit[g.id];
        ++matches;
      }
    }

    correspondence = std::move(next_correspondence);

    MotFrameCounts fc;
    fc.frame = frame;
    fc.matches = matches;
    fc.misses = static_cast<int>(gts.size()) - matches;
    fc.false_positives = static_cast<int>(hyps.size()) - matches;
    fc.id_switches = switches;
    m.per_frame.push_back(fc);

    m.total_gt_positions += static_cast<long>(gts.size());
    m.misses += fc.misses;
    m.false_positives += fc.false_positives;
    m.idsw += switches;
  }

  m.gt_trajectories = static_cast<int>(gt_present.size());
  for (const auto& [id, present] : gt_present) {
    const long hit_count = gt_hit.count(id) ? gt_hit[id] : 0;
    const double fraction = static_cast<double>(hit_count) / static_cast<double>(present);
    if (fraction >= 0.8) ++m.mostly_tracked;
    if (fraction <= 0.2) ++m.mostly_lost;
  }

  const double total = static_cast<double>(m.total_gt_positions);
  const double matched = total - static_cast<double>(m.misses);
  m.recall = total > 0 ? matched / total : 0.0;
  m.mota = total > 0
               ? 1.0 - static_cast<double>(m.misses + m.false_positives + m.idsw) / total
               : 0.0;
  return m;
}

void print_detection_report(std::ostream& os, const DetectionMetrics& m, bool per_frame_table) {
  os << "metric_family detection\n";
  os << "frames " << m.frames << '\n';
  os << "tp " << m.tp << '\n';
  os << "fp " << m.fp << '\n';
  os << "fn " << m.fn << '\n';
  os << "precision " << format_double(m.precision) << '\n';
  os << "recall " << format_double(m.recall) << '\n';
  os << "f_measure " << format_double(m.f_measure) << '\n';
  os << "nfp_per_image " << format_double(m.nfp_per_image) << '\n';
  os << "nfn_per_image " << format_double(m.nfn_per_image) << '\n';
  if (per_frame_table) {
    os << "# frame tp fp fn\n";
    for (std::size_t f = 0; f < m.per_frame.size(); ++f)
      os << "frame " << f << ' ' << m.per_frame[f].tp << ' ' << m.per_frame[f].fp << ' '
         << m.per_frame[f].fn << '\n';
  }
}

void print_mot_report(std::ostream& os, const MotMetrics& m, const MotConfig& cfg,
                      bool per_frame_table) {
  os << "metric_family tracking\n";
  os << "# position-level recall (standard CLEAR convention)\n";
  os << "hit_threshold_px " << format_double(cfg.hit_threshold) << '\n';
  os << "gt_positions " << m.total_gt_positions << '\n';
  os << "gt_trajectories " << m.gt_trajectories << '\n';
  os << "recall " << format_double(m.recall) << '\n';
  os << "mota " << format_double(m.mota) << '\n';
  os << "idsw " << m.idsw << '\n';
  os << "mostly_tracked " << m.mostly_tracked << '\n';
  os << "mostly_lost " << m.mostly_lost << '\n';
  os << "misses " << m.misses << '\n';
  os << "false_positives " << m.false_positives << '\n';
  if (per_frame_table) {
    os << "# frame matches misses fp idsw\n";
    for (const auto& fc : m.per_frame)
      os << "frame " << fc.frame << ' ' << fc.matches << ' ' << fc.misses << ' '
         << fc.false_positives << ' ' << fc.id_switches << '\n';
  }
}

}  // namespace fibertrack
