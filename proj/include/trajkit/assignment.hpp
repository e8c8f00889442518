#pragma once

#include <vector>

#include <Eigen/Core>

namespace trajkit {

struct Assignment {
  // row_to_col[r] is the assigned column or -1.
  std::vector<int> row_to_col;
  double total_cost = 0.0;
};

// Minimum-cost linear assignment (Hungarian / Kuhn-Munkres with potentials).
// Rectangular inputs assign min(rows, cols) pairs. Among optimal solutions the
// lexicographically smallest (row index, column index) choice wins, so the
// result does not depend on solver internals.
Assignment solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace trajkit
