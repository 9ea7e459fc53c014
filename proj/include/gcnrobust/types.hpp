#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace gcnrobust {

using NodeId = std::int32_t;
using FeatureId = std::int32_t;
using ClassId = std::int32_t;

// Row-major so that a node's row is contiguous for the CSR kernels.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace gcnrobust
