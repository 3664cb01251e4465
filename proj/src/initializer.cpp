#include "fibertrack/initializer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fibertrack/common.hpp"

namespace fibertrack {

void HoughParams::validate() const {
  if (min_axis <= 0 || max_axis < min_axis) throw DataError("hough: invalid axis range");
  if (min_minor <= 0 || bin_width <= 0) throw DataError("hough: invalid accumulator parameters");
  if (vote_threshold < 0 || vote_threshold_factor <= 0)
    throw DataError("hough: invalid vote threshold");
}

void InitConfig::validate() const {
  if (size_prior_low_factor <= 0 || size_prior_high_factor <= size_prior_low_factor)
    throw DataError("init: need 0 < low_factor < high_factor");
  if (proposal_nms < 0 || proposal_nms > 1) throw DataError("init: proposal_nms must be in [0,1]");
  hough.validate();
  emmpm.validate();
}

namespace {

double ellipse_perimeter(double a, double b) {
  // Ramanujan approximation
  return std::acos(-1.0) * (3.0 * (a + b) - std::sqrt((3.0 * a + b) * (a + 3.0 * b)));
}

struct PointI {
  int x, y;
};

std::vector<std::vector<PointI>> component_boundaries(const Image& mask) {
  std::vector<int> labels;
  const int n_comp = connected_components(mask, labels);
  std::vector<std::vector<PointI>> boundaries(static_cast<std::size_t>(n_comp));
  const int w = mask.width();
  const int h = mask.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = labels[static_cast<std::size_t>(y) * w + x];
      if (id < 0) continue;
      const bool boundary = x == 0 || y == 0 || x == w - 1 || y == h - 1 ||
                            mask.at(x - 1, y) == 0 || mask.at(x + 1, y) == 0 ||
                            mask.at(x, y - 1) == 0 || mask.at(x, y + 1) == 0;
      if (boundary) boundaries[static_cast<std::size_t>(id)].push_back({x, y});
    }
  }
  return boundaries;
}

struct Candidate {
  Ellipse e;
};

void hough_component(const std::vector<PointI>& boundary, const HoughParams& prm,
                     std::vector<Candidate>& out) {
  const std::size_t n = boundary.size();
  if (n < 6) return;

  const double min_dist = 2.0 * prm.min_axis;
  const double max_dist = 2.0 * prm.max_axis;
  const int n_bins = static_cast<int>(std::ceil((prm.max_axis - 0) / prm.bin_width)) + 2;
  std::vector<int> acc(static_cast<std::size_t>(n_bins));

  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = boundary[j].x - boundary[i].x;
      const double dy = boundary[j].y - boundary[i].y;
      const double dist = std::hypot(dx, dy);
      if (dist < min_dist || dist > max_dist) continue;

      const double cx = 0.5 * (boundary[i].x + boundary[j].x);
      const double cy = 0.5 * (boundary[i].y + boundary[j].y);
      const double a = 0.5 * dist;
      std::fill(acc.begin(), acc.end(), 0);

      for (std::size_t t = 0; t < n; ++t) {
        if (t == i || t == j) continue;
        const double tx = boundary[t].x - cx;
        const double ty = boundary[t].y - cy;
        const double d2 = tx * tx + ty * ty;
        if (d2 >= a * a || d2 < 1e-12) continue;
        const double fx = boundary[t].x - boundary[j].x;
        const double fy = boundary[t].y - boundary[j].y;
        const double f2 = fx * fx + fy * fy;
        const double d = std::sqrt(d2);
        double cos_tau = (a * a + d2 - f2) / (2.0 * a * d);
        cos_tau = std::clamp(cos_tau, -1.0, 1.0);
        const double cos2 = cos_tau * cos_tau;
        const double sin2 = 1.0 - cos2;
        const double denom = a * a - d2 * cos2;
        if (denom <= 1e-9) continue;
        const double b2 = a * a * d2 * sin2 / denom;
        if (b2 <= 0) continue;
        const double b = std::sqrt(b2);
        if (b < prm.min_minor || b > a) continue;
        const int bin = static_cast<int>(b / prm.bin_width);
        if (bin >= 0 && bin < n_bins) ++acc[static_cast<std::size_t>(bin)];
      }

      // peak over a 3-bin window to absorb pixel-quantization spread
      int best_votes = 0;
      int best_bin = -1;
      for (int bin = 1; bin + 1 < n_bins; ++bin) {
        const int votes = acc[static_cast<std::size_t>(bin - 1)] +
                          acc[static_cast<std::size_t>(bin)] +
                          acc[static_cast<std::size_t>(bin + 1)];
        if (votes > best_votes) {
          best_votes = votes;
          best_bin = bin;
        }
      }
      if (best_bin < 0) continue;

      double wsum = 0.0, bsum = 0.0;
      for (int bin = best_bin - 1; bin <= best_bin + 1; ++bin) {
        const double wgt = acc[static_cast<std::size_t>(bin)];
        wsum += wgt;
        bsum += wgt * (bin + 0.5) * prm.bin_width;
      }
      const double b_est = bsum / wsum;
      if (b_est < prm.min_minor) continue;

      const double required =
          prm.vote_threshold > 0
              ? prm.vote_threshold
              : prm.vote_threshold_factor * ellipse_perimeter(a, b_est) / 1.2;
      if (best_votes < required) continue;

      double theta = std::atan2(dy, dx);
      const double pi = std::acos(-1.0);
      theta = std::fmod(theta, pi);
      if (theta < 0) theta += pi;
      out.push_back({Ellipse{cx, cy, a, std::min(b_est, a), theta, best_votes}});
    }
  }
}

}  // namespace

std::vector<Ellipse> hough_ellipses(const Image& mask, const HoughParams& params) {
  params.validate();
  if (mask.empty()) return {};

  std::vector<Candidate> candidates;
  for (const auto& boundary : component_boundaries(mask))
    hough_component(boundary, params, candidates);

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& lhs, const Candidate& rhs) {
                     return lhs.e.votes > rhs.e.votes;
                   });

  std::vector<Ellipse> accepted;
  for (const Candidate& c : candidates) {
    bool duplicate = false;
    for (const Ellipse& e : accepted) {
      const double d = std::hypot(c.e.cx - e.cx, c.e.cy - e.cy);
      if (d < std::max(e.b, c.e.b)) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) accepted.push_back(c.e);
  }
  return accepted;
}

std::vector<BBox> size_prior_filter(const std::vector<BBox>& boxes, double mean_area,
                                    double low_factor, double high_factor) {
  std::vector<BBox> kept;
  kept.reserve(boxes.size());
  for (const BBox& b : boxes) {
    const double area = b.area();
    if (area >= low_factor * mean_area && area <= high_factor * mean_area) kept.push_back(b);
  }
  return kept;
}

std::vector<Detection> size_prior_filter(const std::vector<Detection>& dets, double mean_area,
                                         double low_factor, double high_factor) {
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const Detection& d : dets) {
    const double area = d.box.area();
    if (area >= low_factor * mean_area && area <= high_factor * mean_area) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> gradient_blob_proposals(const Image& image, int frame) {
  const int w = image.width();
  const int h = image.height();
  const FloatImage smooth = gaussian_blur(to_float(image), 1.0);

  FloatImage grad(w, h, 0.0);
  double mean = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
      const int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
      const double gx = 0.5 * (smooth.at(xp, y) - smooth.at(xm, y));
      const double gy = 0.5 * (smooth.at(x, yp) - smooth.at(x, ym));
      grad.at(x, y) = std::hypot(gx, gy);
      mean += grad.at(x, y);
    }
  }
  mean /= static_cast<double>(w) * h;
  double var = 0.0;
  for (double g : grad.px) var += (g - mean) * (g - mean);
  const double sd = std::sqrt(var / (static_cast<double>(w) * h));
  const double threshold = mean + sd;

  Image edges(w, h, 0);
  for (std::size_t p = 0; p < edges.size(); ++p)
    edges.pixels()[p] = grad.px[p] > threshold ? 255 : 0;

  std::vector<int> labels;
  const int n_comp = connected_components(edges, labels);
  struct Blob {
    int min_x = 1 << 30, min_y = 1 << 30, max_x = -1, max_y = -1;
    double grad_sum = 0.0;
    int count = 0;
  };
  std::vector<Blob> blobs(static_cast<std::size_t>(n_comp));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = labels[static_cast<std::size_t>(y) * w + x];
      if (id < 0) continue;
      Blob& b = blobs[static_cast<std::size_t>(id)];
      b.min_x = std::min(b.min_x, x);
      b.min_y = std::min(b.min_y, y);
      b.max_x = std::max(b.max_x, x);
      b.max_y = std::max(b.max_y, y);
      b.grad_sum += grad.at(x, y);
      ++b.count;
    }
  }

  double max_mean_grad = 1e-12;
  for (const Blob& b : blobs)
    if (b.count >= 4) max_mean_grad = std::max(max_mean_grad, b.grad_sum / b.count);

  std::vector<Detection> proposals;
  for (const Blob& b : blobs) {
    if (b.count < 4 || b.max_x <= b.min_x || b.max_y <= b.min_y) continue;
    Detection d;
    d.frame = frame;
    d.box = {static_cast<double>(b.min_x), static_cast<double>(b.min_y),
             static_cast<double>(b.max_x + 1), static_cast<double>(b.max_y + 1)};
    d.score = std::clamp(b.grad_sum / b.count / max_mean_grad, 0.0, 1.0);
    proposals.push_back(d);
  }
  return proposals;
}

double mean_emmpmh_area(const Image& sample_frame, const InitConfig& cfg) {
  EmMpmParams seg = cfg.emmpm;
  const LabelMap lm = emmpm_segment(sample_frame, seg);
  const Image mask = class_mask(lm, sample_frame);
  const auto ellipses = hough_ellipses(mask, cfg.hough);
  if (ellipses.empty())
    throw DataError("initializer: no ellipses found on the sample frame; cannot derive size prior");
  double sum = 0.0;
  for (const Ellipse& e : ellipses) sum += ellipse_min_bbox(e).area();
  return sum / static_cast<double>(ellipses.size());
}

namespace {

bool center_inside(const BBox& b, int width, int height) {
  const Point c = b.center();
  return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
}

}  // namespace

PseudoGT initialize_with_proposals(const std::vector<Image>& frames, const ProposalSource& source,
                                   const InitConfig& cfg, int threads) {
  cfg.validate();
  if (frames.empty()) throw DataError("initializer: empty dataset");

  const double mean_area = mean_emmpmh_area(frames.front(), cfg);

  PseudoGT gp(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t f) {
    auto dets = source(frames[f], static_cast<int>(f));
    dets = size_prior_filter(dets, mean_area, cfg.size_prior_low_factor,
                             cfg.size_prior_high_factor);
    dets = nms(dets, cfg.proposal_nms);
    FrameBoxes boxes;
    boxes.reserve(dets.size());
    for (const Detection& d : dets)
      if (center_inside(d.box, frames[f].width(), frames[f].height())) boxes.push_back(d.box);
    gp[f] = std::move(boxes);
  });
  return gp;
}

PseudoGT initialize_pseudo_gt(const std::vector<Image>& frames, const InitConfig& cfg,
                              int threads) {
  cfg.validate();
  if (frames.empty()) throw DataError("initializer: empty dataset");

  if (cfg.method == InitMethod::Proposals) {
    return initialize_with_proposals(
        frames, [](const Image& img, int f) { return gradient_blob_proposals(img, f); }, cfg,
        threads);
  }

  PseudoGT gp(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t f) {
    EmMpmParams seg = cfg.emmpm;
    seg.rng_seed = derive_seed(cfg.emmpm.rng_seed, 77000 + f);
    const LabelMap lm = emmpm_segment(frames[f], seg);
    const Image mask = class_mask(lm, frames[f]);
    FrameBoxes boxes;
    for (const Ellipse& e : hough_ellipses(mask, cfg.hough)) {
      const BBox b = ellipse_min_bbox(e);
      if (center_inside(b, frames[f].width(), frames[f].height())) boxes.push_back(b);
    }
    gp[f] = std::move(boxes);
  });
  return gp;
}

}  // namespace fibertrack
