#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vgent/assignment.hpp"

namespace {

std::vector<int> col_of_row(const vgent::Matching& m, int rows) {
  std::vector<int> v(rows, -1);
  for (const auto& [r, c] : m.pairs) v[r] = c;
  return v;
}

TEST(Assignment, MatchesBruteForceOnRandomRectangles) {
  vgent::Rng rng(1);
  for (int t = 0; t < 400; ++t) {
    const int r = rng.uniform_int(1, 6), c = rng.uniform_int(1, 6);
    Eigen::MatrixXd cost(r, c);
    for (Eigen::Index k = 0; k < cost.size(); ++k) cost.data()[k] = rng.uniform(-5, 5);
    const auto m = vgent::solve_assignment(cost);
    const auto b = oracle::brute_force_assignment(cost);
    EXPECT_NEAR(m.total_cost, b.cost, 1e-9);
    EXPECT_EQ(static_cast<int>(m.pairs.size()), std::min(r, c));
  }
}

TEST(Assignment, TiesResolveLexicographically) {
  vgent::Rng rng(2);
  for (int t = 0; t < 400; ++t) {
    const int r = rng.uniform_int(1, 6), c = rng.uniform_int(1, 6);
    Eigen::MatrixXd cost(r, c);
    for (Eigen::Index k = 0; k < cost.size(); ++k) cost.data()[k] = rng.uniform_int(0, 3);
    const auto m = vgent::solve_assignment(cost);
    const auto b = oracle::brute_force_assignment(cost);
    EXPECT_EQ(m.total_cost, b.cost);
    EXPECT_EQ(col_of_row(m, r), b.col_of_row);
  }
}

TEST(Assignment, AllEqualCostsGiveIdentity) {
  const auto m = vgent::solve(Eigen::MatrixXd::Constant(4, 4, 2.0));
  ASSERT_EQ(m.pairs.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(m.pairs[i], std::make_pair(i, i));
}

TEST(Assignment, EmptyAndInvalidInputs) {
  EXPECT_TRUE(vgent::solve_assignment(Eigen::MatrixXd(0, 3)).pairs.empty());
  EXPECT_TRUE(vgent::solve_assignment(Eigen::MatrixXd(2, 0)).pairs.empty());
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(vgent::solve_assignment(bad), vgent::InputError);
  bad(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(vgent::solve_assignment(bad), vgent::InputError);
}

TEST(Assignment, AcceptsArrayExpressions) {
  Eigen::MatrixXd overlap(2, 2);
  overlap << 0.9, 0.1, 0.2, 0.8;
  const auto m = vgent::solve(1.0 - overlap.array());
  EXPECT_NEAR(m.total_cost, 0.3, 1e-12);
  EXPECT_EQ(col_of_row(m, 2), (std::vector<int>{0, 1}));
}

}  // namespace
