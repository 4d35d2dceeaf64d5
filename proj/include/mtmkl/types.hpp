#pragma once

#include <Eigen/Dense>

namespace mtmkl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace mtmkl
