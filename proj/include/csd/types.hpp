#pragma once

#include <Eigen/Dense>
#include <vector>

namespace csd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorList = std::vector<Vector>;

}  // namespace csd
