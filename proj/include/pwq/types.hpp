#pragma once

#include <Eigen/Dense>
#include <vector>

namespace pwq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Sorted list of 0-based indices (pieces of a max, rows of a polyhedron).
using IndexSet = std::vector<int>;

}  // namespace pwq
