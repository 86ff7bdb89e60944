#include "scenecarve/assignment.hpp"

#include <limits>

#include "scenecarve/types.hpp"

namespace scenecarve {

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw ValidationError("assignment cost matrix must be square");
  if (!cost.allFinite()) throw ValidationError("assignment cost matrix has non-finite entries");
  const int n = static_cast<int>(cost.rows());
  Assignment out;
  out.column_of_row.assign(n, -1);
  if (n == 0) return out;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is the virtual root of each augmenting tree.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), min_slack(n + 1);
  std::vector<int> row_of_col(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (int row = 1; row <= n; ++row) {
    row_of_col[0] = row;
    int col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const int r = row_of_col[col0];
      double delta = kInf;
      int next_col = 0;
      for (int c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double slack = cost(r - 1, c - 1) - u[r] - v[c];
        if (slack < min_slack[c]) {
          min_slack[c] = slack;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          next_col = c;
        }
      }
      for (int c = 0; c <= n; ++c) {
        if (used[c]) {
          u[row_of_col[c]] += delta;
          v[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = next_col;
    } while (row_of_col[col0] != 0);
    // Flip the augmenting path.
    do {
      const int prev = way[col0];
      row_of_col[col0] = row_of_col[prev];
      col0 = prev;
    } while (col0 != 0);
  }

  for (int c = 1; c <= n; ++c) out.column_of_row[row_of_col[c] - 1] = c - 1;
  for (int r = 0; r < n; ++r) out.total_cost += cost(r, out.column_of_row[r]);
  return out;
}

}  // namespace scenecarve
