#include "fibertrack/emmpm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "fibertrack/common.hpp"

namespace fibertrack {

void EmMpmParams::validate() const {
  if (num_classes < 2) throw DataError("emmpm: num_classes must be >= 2");
  if (em_iterations < 1 || gibbs_sweeps_per_em < 1)
    throw DataError("emmpm: iteration counts must be >= 1");
  if (potts_beta < 0) throw DataError("emmpm: potts_beta must be >= 0");
}

namespace {

constexpr double kSigmaFloor = 0.5;

// Evenly spaced intensity quantiles from the 256-bin histogram.
std::vector<double> quantile_means(const Image& img, int k) {
  std::array<std::size_t, 256> hist{};
  for (uint8_t v : img.pixels()) ++hist[v];
  std::vector<double> means(static_cast<std::size_t>(k));
  const double total = static_cast<double>(img.size());
  for (int c = 0; c < k; ++c) {
    const double target = (c + 0.5) / k * total;
    std::size_t cum = 0;
    int level = 0;
    for (int v = 0; v < 256; ++v) {
      cum += hist[static_cast<std::size_t>(v)];
      if (static_cast<double>(cum) >= target) {
        level = v;
        break;
      }
    }
    means[static_cast<std::size_t>(c)] = level;
  }
  return means;
}

struct GibbsResult {
  std::vector<uint32_t> counts;  // npix * k marginal counts from recorded sweeps
  bool empty_class = false;
};

}  // namespace

LabelMap emmpm_segment(const Image& image, const EmMpmParams& params) {
  params.validate();
  if (image.empty()) throw DataError("emmpm: empty image");

  const int w = image.width();
  const int h = image.height();
  const int k = params.num_classes;
  const std::size_t npix = image.size();
  const auto& pix = image.pixels();

  const std::vector<double> base_means = quantile_means(image, k);

  std::vector<uint32_t> final_counts;
  for (int restart = 0; restart <= params.max_restarts; ++restart) {
    Rng rng(derive_seed(params.rng_seed, static_cast<uint64_t>(restart)));

    std::vector<double> mu = base_means;
    if (restart > 0)
      for (double& m : mu) m = std::clamp(m + rng.normal(0.0, 12.0), 0.0, 255.0);
    std::vector<double> sigma(static_cast<std::size_t>(k), 0.0);
    {
      // initial sigmas from the nearest-mean partition
      std::vector<double> sum(static_cast<std::size_t>(k), 0.0), sq(static_cast<std::size_t>(k), 0.0);
      std::vector<std::size_t> n(static_cast<std::size_t>(k), 0);
      for (std::size_t p = 0; p < npix; ++p) {
        int best = 0;
        double best_d = std::fabs(pix[p] - mu[0]);
        for (int c = 1; c < k; ++c) {
          const double d = std::fabs(pix[p] - mu[static_cast<std::size_t>(c)]);
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        sum[static_cast<std::size_t>(best)] += pix[p];
        sq[static_cast<std::size_t>(best)] += static_cast<double>(pix[p]) * pix[p];
        ++n[static_cast<std::size_t>(best)];
      }
      for (int c = 0; c < k; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        if (n[cc] > 0) {
          const double mean = sum[cc] / static_cast<double>(n[cc]);
          const double var = sq[cc] / static_cast<double>(n[cc]) - mean * mean;
          sigma[cc] = std::max(kSigmaFloor, std::sqrt(std::max(var, 0.0)));
        } else {
          sigma[cc] = 8.0;
        }
      }
    }

    // initial labels: nearest mean
    std::vector<uint8_t> labels(npix);
    for (std::size_t p = 0; p < npix; ++p) {
      int best = 0;
      double best_d = std::fabs(pix[p] - mu[0]);
      for (int c = 1; c < k; ++c) {
        const double d = std::fabs(pix[p] - mu[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      labels[p] = static_cast<uint8_t>(best);
    }

    bool failed = false;
    std::vector<uint32_t> counts;
    std::vector<double> log_norm(static_cast<std::size_t>(k));
    std::vector<double> inv_two_var(static_cast<std::size_t>(k));
    std::vector<double> post(static_cast<std::size_t>(k));

    for (int em = 0; em < params.em_iterations && !failed; ++em) {
      for (int c = 0; c < k; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        log_norm[cc] = -std::log(sigma[cc]);
        inv_two_var[cc] = 1.0 / (2.0 * sigma[cc] * sigma[cc]);
      }

      counts.assign(npix * static_cast<std::size_t>(k), 0);
      const int record_from = params.gibbs_sweeps_per_em / 2;

      for (int sweep = 0; sweep < params.gibbs_sweeps_per_em; ++sweep) {
        // checkerboard schedule: black pixels then white pixels
        for (int color = 0; color < 2; ++color) {
          for (int y = 0; y < h; ++y) {
            for (int x = (y + color) & 1; x < w; x += 2) {
              const std::size_t p = static_cast<std::size_t>(y) * w + x;
              const double v = pix[p];
              double max_lp = -1e300;
              for (int c = 0; c < k; ++c) {
                const auto cc = static_cast<std::size_t>(c);
                int same = 0;
                if (x > 0 && labels[p - 1] == c) ++same;
                if (x + 1 < w && labels[p + 1] == c) ++same;
                if (y > 0 && labels[p - static_cast<std::size_t>(w)] == c) ++same;
                if (y + 1 < h && labels[p + static_cast<std::size_t>(w)] == c) ++same;
                const double diff = v - mu[cc];
                const double lp = log_norm[cc] - diff * diff * inv_two_var[cc] +
                                  params.potts_beta * same;
                post[cc] = lp;
                if (lp > max_lp) max_lp = lp;
              }
              double total = 0.0;
              for (int c = 0; c < k; ++c) {
                const auto cc = static_cast<std::size_t>(c);
                post[cc] = std::exp(post[cc] - max_lp);
                total += post[cc];
              }
              const double u = rng.uniform() * total;
              double cum = 0.0;
              int chosen = k - 1;
              for (int c = 0; c < k; ++c) {
                cum += post[static_cast<std::size_t>(c)];
                if (u < cum) {
                  chosen = c;
                  break;
                }
              }
              labels[p] = static_cast<uint8_t>(chosen);
            }
          }
        }
        if (sweep >= record_from)
          for (std::size_t p = 0; p < npix; ++p)
            ++counts[p * static_cast<std::size_t>(k) + labels[p]];
      }

      // M-step from the recorded marginals
      std::vector<double> wsum(static_cast<std::size_t>(k), 0.0);
      std::vector<double> wval(static_cast<std::size_t>(k), 0.0);
      for (std::size_t p = 0; p < npix; ++p)
        for (int c = 0; c < k; ++c) {
          const double wgt = counts[p * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)];
          wsum[static_cast<std::size_t>(c)] += wgt;
          wval[static_cast<std::size_t>(c)] += wgt * pix[p];
        }
      for (int c = 0; c < k && !failed; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        if (wsum[cc] < 1.0) {
          if (restart < params.max_restarts) {
            failed = true;  // re-jitter and restart
          }
          continue;  // frozen parameters on the last restart
        }
        const double mean = wval[cc] / wsum[cc];
        double var_acc = 0.0;
        for (std::size_t p = 0; p < npix; ++p) {
          const double wgt = counts[p * static_cast<std::size_t>(k) + cc];
          if (wgt == 0.0) continue;
          const double d = pix[p] - mean;
          var_acc += wgt * d * d;
        }
        mu[cc] = mean;
        sigma[cc] = std::max(kSigmaFloor, std::sqrt(var_acc / wsum[cc]));
      }
    }

    if (!failed) {
      final_counts = std::move(counts);
      break;
    }
  }

  if (final_counts.empty()) throw InternalError("emmpm: sampling produced no marginals");

  LabelMap out;
  out.width = w;
  out.height = h;
  out.num_classes = k;
  out.labels.resize(npix);
  for (std::size_t p = 0; p < npix; ++p) {
    int best = 0;
    uint32_t best_n = final_counts[p * static_cast<std::size_t>(k)];
    for (int c = 1; c < k; ++c) {
      const uint32_t n = final_counts[p * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)];
      if (n > best_n) {
        best_n = n;
        best = c;
      }
    }
    out.labels[p] = static_cast<uint8_t>(best);
  }
  return out;
}

Image class_mask(const LabelMap& labelmap, const Image& image) {
  if (labelmap.width != image.width() || labelmap.height != image.height())
    throw DataError("class_mask: label map and image dimensions differ");
  const int k = labelmap.num_classes;
  std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
  std::vector<std::size_t> n(static_cast<std::size_t>(k), 0);
  for (std::size_t p = 0; p < image.size(); ++p) {
    sum[labelmap.labels[p]] += image.pixels()[p];
    ++n[labelmap.labels[p]];
  }
  int fiber_class = 0;
  double best_mean = 1e300;
  for (int c = 0; c < k; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    if (n[cc] == 0) continue;
    const double mean = sum[cc] / static_cast<double>(n[cc]);
    if (mean < best_mean) {
      best_mean = mean;
      fiber_class = c;
    }
  }
  Image mask(image.width(), image.height(), 0);
  for (std::size_t p = 0; p < image.size(); ++p)
    mask.pixels()[p] = labelmap.labels[p] == fiber_class ? 255 : 0;
  return mask;
}

Image label_map_to_image(const LabelMap& labelmap) {
  Image out(labelmap.width, labelmap.height, 0);
  const int k = std::max(labelmap.num_classes, 2);
  const int step = 255 / (k - 1);
  for (std::size_t p = 0; p < labelmap.labels.size(); ++p)
    out.pixels()[p] = static_cast<uint8_t>(std::min(255, labelmap.labels[p] * step));
  return out;
}

}  // namespace fibertrack
