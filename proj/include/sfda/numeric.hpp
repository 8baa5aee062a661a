#pragma once

#include <Eigen/Dense>

namespace sfda {

/// Inverse standard-normal CDF (Wichura's PPND16). Accurate to ~1e-15 for
/// p in (0,1); throws ValidationError outside.
double normal_quantile(double p);

/// Composite trapezoid of sampled values over a strictly increasing grid.
double trapezoid(const Eigen::VectorXd& grid, const Eigen::VectorXd& values);

/// Sample standard deviation with denominator n-1 (0 when n < 2).
double sample_sd(const Eigen::VectorXd& values);

} // namespace sfda
