#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

namespace vgent {

// Rows index ground truth, columns index predictions.
using CostMatrix = Eigen::MatrixXd;

struct Matching {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  double total_cost = 0.0;
};

// Minimum-cost one-to-one assignment of size min(rows, cols).
//
// Among equal-cost optima the lexicographically smallest pairing wins:
// row 0 takes the lowest column it can while staying optimal, then row 1,
// and so on. Throws InputError on non-finite costs.
Matching solve_assignment(const Eigen::Ref<const Eigen::MatrixXd>& costs);

template <typename Derived>
Matching solve(const Eigen::DenseBase<Derived>& costs) {
  const Eigen::MatrixXd evaluated = costs.derived().template cast<double>().matrix();
  return solve_assignment(evaluated);
}

}  // namespace vgent
