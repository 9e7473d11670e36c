#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace fabr {

/// Dense column-major working matrix. Files store row-major; conversion happens at the I/O edge.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using Index = Eigen::Index;

/// Class labels in [0, K).
using Labels = std::vector<int>;

} // namespace fabr
