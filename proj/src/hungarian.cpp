#include "fibertrack/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fibertrack/common.hpp"

namespace fibertrack {

namespace {

// Successive-shortest-path solver for a square matrix. Returns row -> col and
// the dual potentials (u, v) with cost[i][j] - u[i] - v[j] >= 0 everywhere.
void solve_square(const std::vector<double>& a, int n, std::vector<int>& row_to_col,
                  std::vector<double>& u, std::vector<double>& v) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  u.assign(n + 1, 0.0);
  v.assign(n + 1, 0.0);
  std::vector<int> p(n + 1, 0);    // p[j] = row matched to column j (1-based)
  std::vector<int> way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  row_to_col.assign(n, -1);
  for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
}

struct TightGraph {
  int n = 0;
  std::vector<std::vector<int>> cols_of_row;  // ascending column ids
};

bool augment(const TightGraph& g, int row, int fixed_rows, std::vector<char>& visited,
             std::vector<int>& row_to_col, std::vector<int>& col_to_row) {
  for (int c : g.cols_of_row[row]) {
    if (visited[c]) continue;
    visited[c] = 1;
    const int owner = col_to_row[c];
    if (owner == -1 ||
        (owner >= fixed_rows && augment(g, owner, fixed_rows, visited, row_to_col, col_to_row))) {
      row_to_col[row] = c;
      col_to_row[c] = row;
      return true;
    }
  }
  return false;
}

// Rewrites the matching to the lexicographically smallest perfect matching of
// the tight-edge graph. Every perfect matching on tight edges has optimal
// cost, so this selects the lexicographically smallest optimum.
void canonicalize(const TightGraph& g, std::vector<int>& row_to_col,
                  std::vector<int>& col_to_row) {
  const int n = g.n;
  std::vector<char> visited(n);
  for (int r = 0; r < n; ++r) {
    for (int c : g.cols_of_row[r]) {
      if (c == row_to_col[r]) break;  // already the smallest feasible column
      const int r2 = col_to_row[c];
      if (r2 < r) continue;  // column is held by an already-fixed row
      const int c_old = row_to_col[r];
      row_to_col[r] = c;
      col_to_row[c] = r;
      col_to_row[c_old] = -1;
      row_to_col[r2] = -1;
      std::fill(visited.begin(), visited.end(), 0);
      visited[c] = 1;
      if (augment(g, r2, r + 1, visited, row_to_col, col_to_row)) break;
      row_to_col[r] = c_old;
      col_to_row[c_old] = r;
      col_to_row[c] = r2;
      row_to_col[r2] = c;
    }
  }
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
  const int n_rows = static_cast<int>(cost.size());
  if (n_rows == 0) return {};
  const int n_cols = static_cast<int>(cost[0].size());
  if (n_cols == 0) return {};

  double max_abs = 0.0;
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != n_cols)
      throw InternalError("hungarian: ragged cost matrix");
    for (double c : row) {
      if (!std::isfinite(c) || c < 0.0)
        throw InternalError("hungarian: costs must be finite and non-negative");
      max_abs = std::max(max_abs, std::fabs(c));
    }
  }

  const int n = std::max(n_rows, n_cols);
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n_rows; ++i)
    for (int j = 0; j < n_cols; ++j) a[static_cast<std::size_t>(i) * n + j] = cost[i][j];

  std::vector<int> row_to_col;
  std::vector<double> u, v;
  solve_square(a, n, row_to_col, u, v);

  const std::vector<int> solver_match = row_to_col;
  std::vector<int> col_to_row(n, -1);
  for (int i = 0; i < n; ++i) col_to_row[row_to_col[i]] = i;

  TightGraph g;
  g.n = n;
  g.cols_of_row.resize(n);
  const double tol = 1e-9 * (1.0 + max_abs);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a[static_cast<std::size_t>(i) * n + j] - u[i + 1] - v[j + 1] <= tol)
        g.cols_of_row[i].push_back(j);

  canonicalize(g, row_to_col, col_to_row);

  // Guard against tolerance admitting a non-optimal edge.
  double canon_total = 0.0;
  double solver_total = 0.0;
  for (int i = 0; i < n; ++i) {
    canon_total += a[static_cast<std::size_t>(i) * n + row_to_col[i]];
    solver_total += a[static_cast<std::size_t>(i) * n + solver_match[i]];
  }
  const std::vector<int>& final_match =
      canon_total <= solver_total + tol * n ? row_to_col : solver_match;

  Assignment result;
  result.reserve(static_cast<std::size_t>(std::min(n_rows, n_cols)));
  for (int i = 0; i < n_rows; ++i)
    if (final_match[i] < n_cols) result.emplace_back(i, final_match[i]);
  return result;
}

double assignment_cost(const CostMatrix& cost, const Assignment& assignment) {
  double total = 0.0;
  for (const auto& [r, c] : assignment) total += cost[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return total;
}

}  // namespace fibertrack
