#pragma once

#include <Eigen/Dense>

namespace sngrc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace sngrc
