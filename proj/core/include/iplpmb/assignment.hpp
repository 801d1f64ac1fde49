#pragma once

#include <Eigen/Dense>

#include <vector>

namespace iplpmb {

/// Rows are assigned one-to-one onto columns; +infinity marks a forbidden pair.
using CostMatrix = Eigen::MatrixXd;

struct Assignment {
  std::vector<int> row_to_col;
  double cost = 0.0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
///
/// Among equal-cost optima the lexicographically smallest row_to_col is returned.
/// A matrix with zero rows yields the empty assignment. Throws Infeasible when no
/// assignment avoids forbidden entries.
[[nodiscard]] Assignment solve_assignment(const CostMatrix& cost);

/// The k lowest-cost assignments (fewer if fewer exist), nondecreasing in cost,
/// ties ordered lexicographically. Murty's partitioning with a shortest augmenting
/// path solver for each subproblem. Throws Infeasible when none exists.
[[nodiscard]] std::vector<Assignment> murty_kbest(const CostMatrix& cost, int k);

}  // namespace iplpmb
