#include "trajkit/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trajkit/errors.hpp"

namespace trajkit {
namespace {

// Shortest augmenting path with dual potentials; requires rows <= cols.
// Returns row -> col for every row.
std::vector<int> hungarian_rows_le_cols(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
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
      for (int j = 0; j <= m; ++j) {
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
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  }
  return row_to_col;
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  if (cost.rows() <= cost.cols()) return hungarian_rows_le_cols(cost);
  const Eigen::MatrixXd t = cost.transpose();
  const std::vector<int> col_to_row = hungarian_rows_le_cols(t);
  std::vector<int> row_to_col(static_cast<std::size_t>(cost.rows()), -1);
  for (std::size_t c = 0; c < col_to_row.size(); ++c) {
    row_to_col[static_cast<std::size_t>(col_to_row[c])] = static_cast<int>(c);
  }
  return row_to_col;
}

// Optimal cost over a sub-problem given by row/column index lists.
double optimal_cost(const Eigen::MatrixXd& cost, const std::vector<int>& rows,
                    const std::vector<int>& cols) {
  if (rows.empty() || cols.empty()) return 0.0;
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cost(rows[r], cols[c]);
    }
  }
  const std::vector<int> a = hungarian(sub);
  double total = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r] >= 0) total += sub(static_cast<Eigen::Index>(r), a[r]);
  }
  return total;
}

}  // namespace

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  Assignment out;
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  out.row_to_col.assign(static_cast<std::size_t>(n), -1);
  if (n == 0 || m == 0) return out;
  if (!cost.allFinite()) fail(ErrorKind::kInvalidArgument, "assignment: non-finite cost");

  std::vector<int> all_rows(static_cast<std::size_t>(n)), all_cols(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i) all_rows[static_cast<std::size_t>(i)] = i;
  for (int j = 0; j < m; ++j) all_cols[static_cast<std::size_t>(j)] = j;
  const double best = optimal_cost(cost, all_rows, all_cols);
  const double tol = 1e-12 * std::max(1.0, std::abs(best));

  // Fix rows in order, each to the smallest column (or to "unassigned" when
  // there are more rows than columns) that still admits an optimal completion.
  std::vector<int> free_cols = all_cols;
  double fixed_cost = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> rest_rows;
    for (int r = i + 1; r < n; ++r) rest_rows.push_back(r);
    bool placed = false;
    for (std::size_t k = 0; k < free_cols.size(); ++k) {
      const int j = free_cols[k];
      std::vector<int> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(k));
      // Feasibility: the remaining pairs must still fill min(n, m).
      const std::size_t needed = std::min(rest_rows.size(), rest_cols.size());
      const std::size_t remaining_cols = rest_cols.size();
      if (n <= m && needed != rest_rows.size()) continue;
      if (n > m && needed != remaining_cols) continue;
      const double total = fixed_cost + cost(i, j) + optimal_cost(cost, rest_rows, rest_cols);
      if (total <= best + tol) {
        out.row_to_col[static_cast<std::size_t>(i)] = j;
        fixed_cost += cost(i, j);
        free_cols = std::move(rest_cols);
        placed = true;
        break;
      }
    }
    if (!placed && n > m) {
      // Leave this row unassigned; the remaining rows must cover every free column.
      if (rest_rows.size() < free_cols.size()) {
        fail(ErrorKind::kNoSolution, "assignment: tie-break lost feasibility");
      }
      placed = true;
    }
    if (!placed) fail(ErrorKind::kNoSolution, "assignment: tie-break lost optimality");
  }

  out.total_cost = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = out.row_to_col[static_cast<std::size_t>(i)];
    if (j >= 0) out.total_cost += cost(i, j);
  }
  return out;
}

}  // namespace trajkit
