#include "vgent/assignment.hpp"

#include <cmath>
#include <limits>

#include "vgent/error.hpp"

namespace vgent {

namespace {

struct SquareSolution {
  std::vector<int> col_of_row;
  Eigen::VectorXd u, v;  // dual potentials
  double total = 0.0;
};

// Shortest augmenting path Hungarian method on a square matrix.
SquareSolution solve_square(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
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
  SquareSolution s;
  s.col_of_row.assign(n, -1);
  s.u.resize(n);
  s.v.resize(n);
  for (int j = 1; j <= n; ++j) s.col_of_row[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) {
    s.u(i) = u[i + 1];
    s.v(i) = v[i + 1];
    s.total += a(i, s.col_of_row[i]);
  }
  return s;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& a, const std::vector<int>& rows,
                          const std::vector<int>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = a(rows[i], cols[j]);
  return out;
}

}  // namespace

Matching solve_assignment(const Eigen::Ref<const Eigen::MatrixXd>& costs) {
  if (!costs.allFinite()) throw InputError("cost matrix contains non-finite values");
  Matching result;
  const int rows = static_cast<int>(costs.rows()), cols = static_cast<int>(costs.cols());
  if (rows == 0 || cols == 0) return result;

  // Pad to square; the padding cost sits above every real cost.
  const int n = std::max(rows, cols);
  const double pad = costs.maxCoeff() + 1.0;
  Eigen::MatrixXd padded = Eigen::MatrixXd::Constant(n, n, pad);
  padded.topLeftCorner(rows, cols) = costs;

  const double scale = std::max(1.0, padded.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * scale * n;

  // Lexicographic refinement: fix rows in order, each to the lowest column
  // that still admits an optimal completion.
  std::vector<int> live_rows(n), live_cols(n);
  for (int i = 0; i < n; ++i) live_rows[i] = live_cols[i] = i;
  SquareSolution cur = solve_square(padded);

  while (!live_rows.empty()) {
    const int row = live_rows.front();
    const int assigned = live_cols[cur.col_of_row[0]];
    int chosen = assigned;
    SquareSolution chosen_rest;
    bool have_rest = false;

    for (std::size_t jj = 0; jj < live_cols.size(); ++jj) {
      const int col = live_cols[jj];
      if (col >= assigned) break;
      if (row < rows && col >= cols) break;
      const double reduced = padded(row, col) - cur.u(0) - cur.v(static_cast<int>(jj));
      if (reduced > tol) continue;
      std::vector<int> rest_rows(live_rows.begin() + 1, live_rows.end());
      std::vector<int> rest_cols;
      for (int c : live_cols)
        if (c != col) rest_cols.push_back(c);
      SquareSolution rest;
      double rest_total = 0.0;
      if (!rest_rows.empty()) {
        rest = solve_square(submatrix(padded, rest_rows, rest_cols));
        rest_total = rest.total;
      }
      if (rest_total + padded(row, col) <= cur.total + tol) {
        chosen = col;
        chosen_rest = std::move(rest);
        have_rest = true;
        break;
      }
    }

    if (chosen < cols && row < rows) result.pairs.emplace_back(row, chosen);
    live_rows.erase(live_rows.begin());
    live_cols.erase(std::find(live_cols.begin(), live_cols.end(), chosen));
    if (live_rows.empty()) break;
    if (have_rest) {
      cur = std::move(chosen_rest);
    } else {
      cur = solve_square(submatrix(padded, live_rows, live_cols));
    }
  }

  for (const auto& [r, c] : result.pairs) result.total_cost += costs(r, c);
  return result;
}

}  // namespace vgent
