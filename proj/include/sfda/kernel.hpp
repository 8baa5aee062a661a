#pragma once

#include <Eigen/Dense>

namespace sfda {

/// Penalized derivative order m of the Sobolev space H^m[0,1].
/// Supported range 1..6: the kernel needs Bernoulli polynomials up to
/// degree 2m, which are tabulated exactly up to degree 12.
struct SplineOrder {
  int m = 2;

  explicit SplineOrder(int order = 2);
};

/// Kernel and null-space design matrices over a set of observation points.
///   Q[a,b] = R(t_a, t_b)       (M x M, symmetric positive semidefinite)
///   T[a,k] = t_a^k             (M x m monomial basis of the penalty null space)
struct KernelGram {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd T;
  Eigen::VectorXd points;
};

/// Bernoulli polynomial B_r(t), coefficients exact rationals, 0 <= r <= 12.
double bernoulli_poly(int r, double t);

/// Reproducing kernel of the penalized component of H^m[0,1]:
///   R(s,t) = B_m(s) B_m(t) / (m!)^2 - B_{2m}(|s-t|) / (2m)!
/// Both arguments must lie in [0,1].
double kernel_R(double s, double t, SplineOrder order);

/// Null-space basis (1, t, ..., t^{m-1}) evaluated at t in [0,1].
Eigen::VectorXd null_basis(SplineOrder order, double t);

/// Assembles Q and T over the given points. Duplicate points are allowed;
/// requires at least m distinct values so that T has full column rank.
KernelGram gram_matrices(const Eigen::VectorXd& points, SplineOrder order);

} // namespace sfda
