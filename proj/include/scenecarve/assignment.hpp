#pragma once

#include <vector>

#include <Eigen/Core>

namespace scenecarve {

struct Assignment {
  std::vector<int> column_of_row;
  double total_cost = 0.0;
};

/// Minimum-cost perfect assignment on a square cost matrix by successive
/// shortest augmenting paths with node potentials, O(n^3).
Assignment solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace scenecarve
