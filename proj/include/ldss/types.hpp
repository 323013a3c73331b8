#pragma once

#include <Eigen/Core>

namespace ldss {

/// A point of the embedded space [0,1]^m.
using Point = Eigen::VectorXd;

/// n embedded points stored one per row, contiguous per point.
using Cloud = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace ldss
