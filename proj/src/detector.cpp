#include "fibertrack/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fibertrack/common.hpp"

namespace fibertrack {

void FeatureSpec::validate() const {
  if (patch_size < 4) throw DataError("detector: patch_size must be >= 4");
  if (orientation_bins < 2) throw DataError("detector: orientation_bins must be >= 2");
  if (window_sides.empty()) throw DataError("detector: scale list must be non-empty");
  for (double s : window_sides)
    if (s < 2.0) throw DataError("detector: window sides must be >= 2 px");
}

FeatureSpec make_feature_spec(double mean_area, double low_factor, double high_factor) {
  if (mean_area <= 0) throw DataError("detector: mean_area must be positive");
  FeatureSpec spec;
  const double lo = std::max(4.0, std::sqrt(low_factor * mean_area));
  const double hi = std::max(lo + 1.0, std::sqrt(high_factor * mean_area));
  spec.window_sides = {lo, std::sqrt(lo * hi), hi};
  return spec;
}

std::vector<float> extract_features(const Image& image, const BBox& box, const FeatureSpec& spec) {
  const int n = spec.patch_size;
  std::vector<double> patch(static_cast<std::size_t>(n) * n);

  // resample the box region onto the fixed patch grid
  for (int py = 0; py < n; ++py) {
    for (int px = 0; px < n; ++px) {
      const double sx = box.x1 + (px + 0.5) / n * box.width();
      const double sy = box.y1 + (py + 0.5) / n * box.height();
      patch[static_cast<std::size_t>(py) * n + px] = bilinear_sample(image, sx - 0.5, sy - 0.5);
    }
  }

  double mean = 0.0;
  for (double v : patch) mean += v;
  mean /= static_cast<double>(patch.size());
  double var = 0.0;
  for (double v : patch) var += (v - mean) * (v - mean);
  const double inv_sd = 1.0 / std::sqrt(var / static_cast<double>(patch.size()) + 1.0);

  std::vector<float> features(static_cast<std::size_t>(spec.dim()));
  for (std::size_t i = 0; i < patch.size(); ++i)
    features[i] = static_cast<float>((patch[i] - mean) * inv_sd);

  // gradient-orientation histogram over the resampled patch
  const double two_pi = 2.0 * std::acos(-1.0);
  std::vector<double> hist(static_cast<std::size_t>(spec.orientation_bins), 0.0);
  double total_mag = 0.0;
  for (int py = 1; py + 1 < n; ++py) {
    for (int px = 1; px + 1 < n; ++px) {
      const double gx = 0.5 * (patch[static_cast<std::size_t>(py) * n + px + 1] -
                               patch[static_cast<std::size_t>(py) * n + px - 1]);
      const double gy = 0.5 * (patch[static_cast<std::size_t>(py + 1) * n + px] -
                               patch[static_cast<std::size_t>(py - 1) * n + px]);
      const double mag = std::hypot(gx, gy);
      if (mag < 1e-12) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0) angle += two_pi;
      int bin = static_cast<int>(angle / two_pi * spec.orientation_bins);
      bin = std::min(bin, spec.orientation_bins - 1);
      hist[static_cast<std::size_t>(bin)] += mag;
      total_mag += mag;
    }
  }
  const double scale = spec.orientation_bins / (total_mag + 1e-9);
  for (int b = 0; b < spec.orientation_bins; ++b)
    features[patch.size() + static_cast<std::size_t>(b)] =
        static_cast<float>(hist[static_cast<std::size_t>(b)] * scale);
  return features;
}

namespace {

std::array<double, 4> regression_target(const BBox& sample, const BBox& target) {
  const Point sc = sample.center();
  const Point tc = target.center();
  return {(tc.x - sc.x) / sample.width(), (tc.y - sc.y) / sample.height(),
          std::log(target.width() / sample.width()),
          std::log(target.height() / sample.height())};
}

BBox apply_regression(const BBox& box, const std::array<double, 4>& t) {
  // keep offsets bounded so a wild regressor cannot produce degenerate boxes
  const double dx = std::clamp(t[0], -1.0, 1.0);
  const double dy = std::clamp(t[1], -1.0, 1.0);
  const double dw = std::clamp(t[2], -1.0, 1.0);
  const double dh = std::clamp(t[3], -1.0, 1.0);
  const Point c = box.center();
  const double cx = c.x + dx * box.width();
  const double cy = c.y + dy * box.height();
  const double w = box.width() * std::exp(dw);
  const double h = box.height() * std::exp(dh);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

double max_iou(const BBox& box, const FrameBoxes& others) {
  double best = 0.0;
  for (const BBox& o : others) best = std::max(best, iou(box, o));
  return best;
}

}  // namespace

SampleSet sample_training_patches(const std::vector<Image>& frames, const PseudoGT& gp,
                                  const FeatureSpec& spec, const SamplerConfig& cfg,
                                  int threads) {
  spec.validate();
  if (frames.size() != gp.size())
    throw DataError("detector: frame count and pseudo-GT frame count differ");

  std::vector<SampleSet> per_frame(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t f) {
    Rng rng(derive_seed(cfg.rng_seed, 31000 + f));
    const Image& img = frames[f];
    const FrameBoxes& boxes = gp[f];
    SampleSet& out = per_frame[f];

    const int cap_pos = std::max(1, static_cast<int>(cfg.per_frame_cap / (1.0 + cfg.neg_per_pos)));

    std::vector<TrainingSample> pos;
    for (const BBox& b : boxes) {
      if (!b.valid()) continue;
      TrainingSample base;
      base.frame = static_cast<int>(f);
      base.box = b;
      base.reg_target = {0.0, 0.0, 0.0, 0.0};
      base.positive = true;
      pos.push_back(std::move(base));

      for (int j = 0; j < cfg.jitter_per_box; ++j) {
        for (int attempt = 0; attempt < 8; ++attempt) {
          BBox jb = b;
          const double sx = rng.uniform(-0.08, 0.08) * b.width();
          const double sy = rng.uniform(-0.08, 0.08) * b.height();
          const double sw = std::exp(rng.uniform(-0.08, 0.08));
          const double sh = std::exp(rng.uniform(-0.08, 0.08));
          const Point c = b.center();
          const double w = b.width() * sw;
          const double h = b.height() * sh;
          jb = {c.x + sx - 0.5 * w, c.y + sy - 0.5 * h, c.x + sx + 0.5 * w, c.y + sy + 0.5 * h};
          if (iou(jb, b) <= cfg.iou_positive) continue;
          TrainingSample s;
          s.frame = static_cast<int>(f);
          s.box = jb;
          s.reg_target = regression_target(jb, b);
          s.positive = true;
          pos.push_back(std::move(s));
          break;
        }
      }
    }

    if (static_cast<int>(pos.size()) > cap_pos) {
      // deterministic subsample: shuffle then truncate
      for (std::size_t i = pos.size(); i > 1; --i)
        std::swap(pos[i - 1], pos[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
      pos.resize(static_cast<std::size_t>(cap_pos));
    }

    const int neg_target = std::min(
        cfg.per_frame_cap - static_cast<int>(pos.size()),
        static_cast<int>(std::lround(cfg.neg_per_pos * std::max<std::size_t>(pos.size(), 4))));
    std::vector<TrainingSample> neg;
    const double lo_side = spec.window_sides.front();
    const double hi_side = spec.window_sides.back();
    int attempts = 0;
    while (static_cast<int>(neg.size()) < neg_target && attempts < neg_target * 50) {
      ++attempts;
      const double side = std::exp(rng.uniform(std::log(lo_side), std::log(hi_side)));
      if (side >= img.width() - 1 || side >= img.height() - 1) continue;
      const double x1 = rng.uniform(0.0, img.width() - side - 1.0);
      const double y1 = rng.uniform(0.0, img.height() - side - 1.0);
      const BBox cand{x1, y1, x1 + side, y1 + side};
      if (max_iou(cand, boxes) >= cfg.iou_negative) continue;  // in (0.3, 0.7]: discarded too
      TrainingSample s;
      s.frame = static_cast<int>(f);
      s.box = cand;
      s.positive = false;
      neg.push_back(std::move(s));
    }

    for (auto& s : pos) s.features = extract_features(img, s.box, spec);
    for (auto& s : neg) s.features = extract_features(img, s.box, spec);
    out.positives = std::move(pos);
    out.negatives = std::move(neg);
  });

  SampleSet result;
  for (auto& fs : per_frame) {
    std::move(fs.positives.begin(), fs.positives.end(), std::back_inserter(result.positives));
    std::move(fs.negatives.begin(), fs.negatives.end(), std::back_inserter(result.negatives));
  }
  if (result.positives.empty())
    throw DataError("detector: pseudo ground truth produced zero positive samples");
  return result;
}

std::vector<double> pack_parameters(const DetectorModel& model) {
  const int dim = model.spec.dim();
  std::vector<double> params(static_cast<std::size_t>(dim) * 5 + 5, 0.0);
  std::copy(model.cls_weights.begin(), model.cls_weights.end(), params.begin());
  params[static_cast<std::size_t>(dim)] = model.cls_bias;
  std::copy(model.reg_weights.begin(), model.reg_weights.end(),
            params.begin() + dim + 1);
  for (int r = 0; r < 4; ++r)
    params[static_cast<std::size_t>(dim) * 5 + 1 + static_cast<std::size_t>(r)] = model.reg_bias[static_cast<std::size_t>(r)];
  return params;
}

void unpack_parameters(const std::vector<double>& params, DetectorModel& model) {
  const int dim = model.spec.dim();
  model.cls_weights.assign(params.begin(), params.begin() + dim);
  model.cls_bias = params[static_cast<std::size_t>(dim)];
  model.reg_weights.assign(params.begin() + dim + 1, params.begin() + dim + 1 + 4 * dim);
  for (int r = 0; r < 4; ++r)
    model.reg_bias[static_cast<std::size_t>(r)] =
        params[static_cast<std::size_t>(dim) * 5 + 1 + static_cast<std::size_t>(r)];
}

double loss_and_gradient(const std::vector<double>& params, int feature_dim,
                         const std::vector<const TrainingSample*>& batch, double reg_loss_weight,
                         std::vector<double>* grad) {
  const std::size_t dim = static_cast<std::size_t>(feature_dim);
  if (params.size() != dim * 5 + 5) throw InternalError("detector: parameter block size mismatch");
  if (grad) grad->assign(params.size(), 0.0);
  if (batch.empty()) return 0.0;

  const double* cls_w = params.data();
  const double cls_b = params[dim];
  const double* reg_w = params.data() + dim + 1;
  const double* reg_b = params.data() + dim * 5 + 1;

  double cls_loss = 0.0;
  double reg_loss = 0.0;
  std::size_t n_pos = 0;
  for (const TrainingSample* s : batch)
    if (s->positive) ++n_pos;

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double inv_pos = n_pos > 0 ? 1.0 / static_cast<double>(n_pos) : 0.0;

  for (const TrainingSample* s : batch) {
    double z = cls_b;
    for (std::size_t i = 0; i < dim; ++i) z += cls_w[i] * s->features[i];
    const double y = s->positive ? 1.0 : 0.0;
    // numerically stable log loss
    const double zy = s->positive ? z : -z;
    cls_loss += zy > 0 ? std::log1p(std::exp(-zy)) : -zy + std::log1p(std::exp(zy));
    if (grad) {
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double g = (p - y) * inv_n;
      double* gw = grad->data();
      for (std::size_t i = 0; i < dim; ++i) gw[i] += g * s->features[i];
      (*grad)[dim] += g;
    }

    if (s->positive && reg_loss_weight != 0.0) {
      for (int r = 0; r < 4; ++r) {
        const double* wr = reg_w + static_cast<std::size_t>(r) * dim;
        double pred = reg_b[r];
        for (std::size_t i = 0; i < dim; ++i) pred += wr[i] * s->features[i];
        const double x = pred - s->reg_target[static_cast<std::size_t>(r)];
        const double ax = std::fabs(x);
        reg_loss += ax < 1.0 ? 0.5 * x * x : ax - 0.5;
        if (grad) {
          const double dldx = (ax < 1.0 ? x : (x > 0 ? 1.0 : -1.0)) * reg_loss_weight * inv_pos;
          double* gw = grad->data() + dim + 1 + static_cast<std::size_t>(r) * dim;
          for (std::size_t i = 0; i < dim; ++i) gw[i] += dldx * s->features[i];
          (*grad)[dim * 5 + 1 + static_cast<std::size_t>(r)] += dldx;
        }
      }
    }
  }

  return cls_loss * inv_n + reg_loss_weight * reg_loss * inv_pos;
}

namespace {

DetectorModel run_sgd(DetectorModel model, const SampleSet& samples, const TrainConfig& cfg) {
  if (samples.positives.empty() || samples.negatives.empty())
    throw DataError("detector: training requires both positive and negative samples");
  if (cfg.epochs < 0 || cfg.learning_rate <= 0 || cfg.batch_size < 1)
    throw DataError("detector: invalid training configuration");

  std::vector<const TrainingSample*> all;
  all.reserve(samples.positives.size() + samples.negatives.size());
  for (const auto& s : samples.positives) all.push_back(&s);
  for (const auto& s : samples.negatives) all.push_back(&s);

  const int dim = model.spec.dim();
  for (const TrainingSample* s : all)
    if (static_cast<int>(s->features.size()) != dim)
      throw DataError("detector: sample feature dimension mismatch");

  std::vector<double> params = pack_parameters(model);
  Rng rng(derive_seed(cfg.rng_seed, 97));
  std::vector<double> grad;
  std::vector<const TrainingSample*> batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = all.size(); i > 1; --i)
      std::swap(all[i - 1], all[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

    for (std::size_t start = 0; start < all.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(all.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.assign(all.begin() + static_cast<std::ptrdiff_t>(start),
                   all.begin() + static_cast<std::ptrdiff_t>(end));
      const double loss = loss_and_gradient(params, dim, batch, cfg.reg_loss_weight, &grad);
      if (!std::isfinite(loss))
        throw InternalError("detector: training diverged at epoch " + std::to_string(epoch + 1));
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grad[i];
    }
  }

  unpack_parameters(params, model);
  model.epochs_seen += cfg.epochs;
  model.train_seed = cfg.rng_seed;
  return model;
}

}  // namespace

DetectorModel train_detector(const SampleSet& samples, const FeatureSpec& spec,
                             const TrainConfig& cfg) {
  spec.validate();
  DetectorModel model;
  model.spec = spec;
  model.cls_weights.assign(static_cast<std::size_t>(spec.dim()), 0.0);
  model.reg_weights.assign(static_cast<std::size_t>(spec.dim()) * 4, 0.0);
  return run_sgd(std::move(model), samples, cfg);
}

DetectorModel fine_tune(const DetectorModel& model, const SampleSet& samples,
                        const TrainConfig& cfg) {
  if (!model.trained()) throw DataError("detector: fine_tune requires a trained model");
  return run_sgd(model, samples, cfg);
}

std::vector<Detection> detect(const DetectorModel& model, const Image& image, int frame_index) {
  if (!model.trained()) throw DataError("detector: model is not trained");
  model.spec.validate();
  const int dim = model.spec.dim();

  std::vector<Detection> raw;
  for (double side : model.spec.window_sides) {
    if (side >= image.width() || side >= image.height()) continue;
    const double stride = std::max(1.0, std::round(side / 4.0));
    const double max_x = image.width() - side;
    const double max_y = image.height() - side;
    for (double y = 0.0; y <= max_y; y += stride) {
      for (double x = 0.0; x <= max_x; x += stride) {
        const BBox window{x, y, x + side, y + side};
        const std::vector<float> f = extract_features(image, window, model.spec);
        double z = model.cls_bias;
        for (int i = 0; i < dim; ++i) z += model.cls_weights[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(i)];
        const double score = 1.0 / (1.0 + std::exp(-z));
        if (score <= model.score_threshold) continue;

        std::array<double, 4> t{};
        for (int r = 0; r < 4; ++r) {
          double pred = model.reg_bias[static_cast<std::size_t>(r)];
          const double* wr = model.reg_weights.data() + static_cast<std::size_t>(r) * dim;
          for (int i = 0; i < dim; ++i) pred += wr[i] * f[static_cast<std::size_t>(i)];
          t[static_cast<std::size_t>(r)] = pred;
        }
        raw.push_back({frame_index, apply_regression(window, t), score});
      }
    }
  }
  return nms(raw, model.nms_threshold);
}

void save_model(const DetectorModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format_version"] = DetectorModel::kFormatVersion;
  j["patch_size"] = model.spec.patch_size;
  j["orientation_bins"] = model.spec.orientation_bins;
  j["window_sides"] = model.spec.window_sides;
  j["cls_weights"] = model.cls_weights;
  j["cls_bias"] = model.cls_bias;
  j["reg_weights"] = model.reg_weights;
  j["reg_bias"] = model.reg_bias;
  j["score_threshold"] = model.score_threshold;
  j["nms_threshold"] = model.nms_threshold;
  j["epochs_seen"] = model.epochs_seen;
  j["train_seed"] = model.train_seed;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

DetectorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model parse error in " + path.string() + ": " + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != DetectorModel::kFormatVersion)
    throw DataError("model format version mismatch in " + path.string());
  DetectorModel m;
  m.spec.patch_size = j.at("patch_size").get<int>();
  m.spec.orientation_bins = j.at("orientation_bins").get<int>();
  m.spec.window_sides = j.at("window_sides").get<std::vector<double>>();
  m.cls_weights = j.at("cls_weights").get<std::vector<double>>();
  m.cls_bias = j.at("cls_bias").get<double>();
  m.reg_weights = j.at("reg_weights").get<std::vector<double>>();
  const auto rb = j.at("reg_bias").get<std::vector<double>>();
  if (rb.size() != 4) throw DataError("model reg_bias must have 4 entries: " + path.string());
  std::copy(rb.begin(), rb.end(), m.reg_bias.begin());
  m.score_threshold = j.at("score_threshold").get<double>();
  m.nms_threshold = j.at("nms_threshold").get<double>();
  m.epochs_seen = j.at("epochs_seen").get<int>();
  m.train_seed = j.at("train_seed").get<uint64_t>();
  m.spec.validate();
  if (static_cast<int>(m.cls_weights.size()) != m.spec.dim() ||
      static_cast<int>(m.reg_weights.size()) != 4 * m.spec.dim())
    throw DataError("model weight sizes inconsistent with feature spec: " + path.string());
  return m;
}

}  // namespace fibertrack
