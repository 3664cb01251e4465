// Test-only reference implementations, kept independent of the library code
// paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "fibertrack/ellipse.hpp"
#include "fibertrack/geometry.hpp"

namespace oracles {

// ---- IoU via rasterization ------------------------------------------------
// Cells of side h at centers ((i+0.5)h, (j+0.5)h). For axis-aligned boxes the
// 2D cell count factorizes into per-axis counts, so the grid count can be
// evaluated in closed form; grid_iou_literal is the plain double loop used to
// cross-check the factorization.

inline long count_centers_1d(double lo, double hi, double h) {
  if (hi <= lo) return 0;
  const long i_hi = static_cast<long>(std::floor(hi / h - 0.5));
  const long i_lo = static_cast<long>(std::ceil(lo / h - 0.5));
  return std::max(0L, i_hi - i_lo + 1);
}

inline long grid_count_box(const fibertrack::BBox& b, double h) {
  return count_centers_1d(b.x1, b.x2, h) * count_centers_1d(b.y1, b.y2, h);
}

inline double grid_iou(const fibertrack::BBox& a, const fibertrack::BBox& b, double h) {
  const double ix1 = std::max(a.x1, b.x1), ix2 = std::min(a.x2, b.x2);
  const double iy1 = std::max(a.y1, b.y1), iy2 = std::min(a.y2, b.y2);
  long inter = 0;
  if (ix2 > ix1 && iy2 > iy1)
    inter = count_centers_1d(ix1, ix2, h) * count_centers_1d(iy1, iy2, h);
  const long uni = grid_count_box(a, h) + grid_count_box(b, h) - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline double grid_iou_literal(const fibertrack::BBox& a, const fibertrack::BBox& b, double h) {
  const double x_lo = std::min(a.x1, b.x1), x_hi = std::max(a.x2, b.x2);
  const double y_lo = std::min(a.y1, b.y1), y_hi = std::max(a.y2, b.y2);
  long inter = 0, uni = 0;
  const long i0 = static_cast<long>(std::floor(x_lo / h)) - 1;
  const long i1 = static_cast<long>(std::ceil(x_hi / h)) + 1;
  const long j0 = static_cast<long>(std::floor(y_lo / h)) - 1;
  const long j1 = static_cast<long>(std::ceil(y_hi / h)) + 1;
  for (long j = j0; j <= j1; ++j) {
    const double cy = (j + 0.5) * h;
    for (long i = i0; i <= i1; ++i) {
      const double cx = (i + 0.5) * h;
      const bool in_a = cx > a.x1 && cx < a.x2 && cy > a.y1 && cy < a.y2;
      const bool in_b = cx > b.x1 && cx < b.x2 && cy > b.y1 && cy < b.y2;
      if (in_a && in_b) ++inter;
      if (in_a || in_b) ++uni;
    }
  }
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

// ---- brute-force assignment ----------------------------------------------
// Exhaustive permutation search on a square matrix. Enumerating column
// permutations in lexicographic order and keeping strict improvements yields
// the lexicographically smallest assignment among the minima.

struct BruteForceResult {
  double total = std::numeric_limits<double>::infinity();
  std::vector<int> row_to_col;
};

inline BruteForceResult brute_force_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  BruteForceResult best;
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    if (total < best.total) {
      best.total = total;
      best.row_to_col = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// ---- textbook Kalman update ------------------------------------------------
// Naive dense-matrix evaluation of the standard equations, with Gauss-Jordan
// inversion and the Joseph-form covariance update.

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(int r, int c) { return Mat(static_cast<std::size_t>(r), std::vector<double>(static_cast<std::size_t>(c), 0.0)); }

inline Mat identity(int n) {
  Mat m = zeros(n, n);
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  const int r = static_cast<int>(a.size());
  const int k = static_cast<int>(b.size());
  const int c = static_cast<int>(b[0].size());
  Mat out = zeros(r, c);
  for (int i = 0; i < r; ++i)
    for (int t = 0; t < k; ++t)
      for (int j = 0; j < c; ++j)
        out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
            a[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] * b[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
  return out;
}

inline Mat transpose(const Mat& a) {
  const int r = static_cast<int>(a.size());
  const int c = static_cast<int>(a[0].size());
  Mat out = zeros(c, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return out;
}

inline Mat add(const Mat& a, const Mat& b, double sb = 1.0) {
  Mat out = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) out[i][j] += sb * b[i][j];
  return out;
}

inline Mat inverse(Mat a) {
  const int n = static_cast<int>(a.size());
  Mat inv = identity(n);
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]) >
          std::fabs(a[static_cast<std::size_t>(pivot)][static_cast<std::size_t>(col)]))
        pivot = r;
    std::swap(a[static_cast<std::size_t>(col)], a[static_cast<std::size_t>(pivot)]);
    std::swap(inv[static_cast<std::size_t>(col)], inv[static_cast<std::size_t>(pivot)]);
    const double d = a[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
    for (int j = 0; j < n; ++j) {
      a[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)] /= d;
      inv[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)] /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)];
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        a[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] -= f * a[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)];
        inv[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] -= f * inv[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)];
      }
    }
  }
  return inv;
}

struct KalmanOracleResult {
  std::vector<double> state;  // 8
  Mat covariance;             // 8x8
};

inline KalmanOracleResult kalman_correct_oracle(const std::vector<double>& state, const Mat& P,
                                                const std::vector<double>& z, double r) {
  Mat h = zeros(4, 8);
  h[0][0] = 1.0;
  h[1][1] = 1.0;
  h[2][4] = 1.0;
  h[3][5] = 1.0;

  const Mat ht = transpose(h);
  Mat s = add(matmul(matmul(h, P), ht), identity(4), 0.0);
  for (int i = 0; i < 4; ++i) s[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] += r;
  const Mat k = matmul(matmul(P, ht), inverse(s));

  Mat sv = zeros(8, 1);
  for (int i = 0; i < 8; ++i) sv[static_cast<std::size_t>(i)][0] = state[static_cast<std::size_t>(i)];
  Mat zv = zeros(4, 1);
  for (int i = 0; i < 4; ++i) zv[static_cast<std::size_t>(i)][0] = z[static_cast<std::size_t>(i)];
  const Mat innovation = add(zv, matmul(h, sv), -1.0);
  const Mat new_state = add(sv, matmul(k, innovation));

  // Joseph form: (I - KH) P (I - KH)^T + K R K^T
  const Mat ikh = add(identity(8), matmul(k, h), -1.0);
  Mat rm = identity(4);
  for (int i = 0; i < 4; ++i) rm[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = r;
  const Mat new_p = add(matmul(matmul(ikh, P), transpose(ikh)), matmul(matmul(k, rm), transpose(k)));

  KalmanOracleResult out;
  out.state.resize(8);
  for (int i = 0; i < 8; ++i) out.state[static_cast<std::size_t>(i)] = new_state[static_cast<std::size_t>(i)][0];
  out.covariance = new_p;
  return out;
}

// ---- dense ellipse boundary ------------------------------------------------

inline std::vector<fibertrack::Point> ellipse_boundary_samples(const fibertrack::Ellipse& e,
                                                               int n_samples) {
  std::vector<fibertrack::Point> pts;
  pts.reserve(static_cast<std::size_t>(n_samples));
  const double two_pi = 2.0 * std::acos(-1.0);
  const double ct = std::cos(e.theta), st = std::sin(e.theta);
  for (int i = 0; i < n_samples; ++i) {
    const double t = two_pi * i / n_samples;
    const double ex = e.a * std::cos(t);
    const double ey = e.b * std::sin(t);
    pts.push_back({e.cx + ex * ct - ey * st, e.cy + ex * st + ey * ct});
  }
  return pts;
}

}  // namespace oracles
