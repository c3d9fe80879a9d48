#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace probest::detail {

/// Largest L-infinity-bounded homogeneous margin
///   max_theta min_i <theta, a_i>  subject to |theta_j| <= 1,
/// where the rows of `signed_rows` are a_i = y_i x_i with y_i in {-1, +1}.
///
/// Solved through the LP dual
///   min ||A^T lambda||_1  subject to lambda >= 0, sum(lambda) = 1
/// with a dense tableau simplex. The optimum is >= 0 and is zero exactly when
/// the points are not strictly separable by a hyperplane through the origin.
double max_box_margin(const Eigen::MatrixXd& signed_rows);

}  // namespace probest::detail
