#include "sfda/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sfda/errors.hpp"

namespace sfda {

namespace {

// Coefficients of B_r(t) in ascending powers of t, r = 0..12.
// Exact rationals evaluated once in double precision.
const double kBernoulliCoeffs[13][13] = {
    {1.0},
    {-1.0 / 2, 1.0},
    {1.0 / 6, -1.0, 1.0},
    {0.0, 1.0 / 2, -3.0 / 2, 1.0},
    {-1.0 / 30, 0.0, 1.0, -2.0, 1.0},
    {0.0, -1.0 / 6, 0.0, 5.0 / 3, -5.0 / 2, 1.0},
    {1.0 / 42, 0.0, -1.0 / 2, 0.0, 5.0 / 2, -3.0, 1.0},
    {0.0, 1.0 / 6, 0.0, -7.0 / 6, 0.0, 7.0 / 2, -7.0 / 2, 1.0},
    {-1.0 / 30, 0.0, 2.0 / 3, 0.0, -7.0 / 3, 0.0, 14.0 / 3, -4.0, 1.0},
    {0.0, -3.0 / 10, 0.0, 2.0, 0.0, -21.0 / 5, 0.0, 6.0, -9.0 / 2, 1.0},
    {5.0 / 66, 0.0, -3.0 / 2, 0.0, 5.0, 0.0, -7.0, 0.0, 15.0 / 2, -5.0, 1.0},
    {0.0, 5.0 / 6, 0.0, -11.0 / 2, 0.0, 11.0, 0.0, -11.0, 0.0, 55.0 / 6,
     -11.0 / 2, 1.0},
    {-691.0 / 2730, 0.0, 5.0, 0.0, -33.0 / 2, 0.0, 22.0, 0.0, -33.0 / 2, 0.0,
     11.0, -6.0, 1.0},
};

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

void require_unit_interval(double t, const char* who) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ValidationError(std::string(who) + ": argument outside [0,1]");
  }
}

} // namespace

SplineOrder::SplineOrder(int order) : m(order) {
  if (m < 1 || 2 * m > 12) {
    throw ValidationError("SplineOrder: m must satisfy 1 <= m and 2m <= 12");
  }
}

double bernoulli_poly(int r, double t) {
  if (r < 0 || r > 12) {
    throw ValidationError("bernoulli_poly: order outside supported range 0..12");
  }
  const double* c = kBernoulliCoeffs[r];
  double acc = c[r];
  for (int k = r - 1; k >= 0; --k) acc = acc * t + c[k];
  return acc;
}

double kernel_R(double s, double t, SplineOrder order) {
  require_unit_interval(s, "kernel_R");
  require_unit_interval(t, "kernel_R");
  const int m = order.m;
  const double fm = factorial(m);
  return bernoulli_poly(m, s) * bernoulli_poly(m, t) / (fm * fm) -
         bernoulli_poly(2 * m, std::abs(s - t)) / factorial(2 * m);
}

Eigen::VectorXd null_basis(SplineOrder order, double t) {
  require_unit_interval(t, "null_basis");
  Eigen::VectorXd phi(order.m);
  double p = 1.0;
  for (int k = 0; k < order.m; ++k) {
    phi[k] = p;
    p *= t;
  }
  return phi;
}

KernelGram gram_matrices(const Eigen::VectorXd& points, SplineOrder order) {
  const Eigen::Index M = points.size();
  if (M < order.m) {
    throw ValidationError("gram_matrices: need at least m points");
  }
  std::vector<double> sorted(points.data(), points.data() + M);
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
  if (distinct < order.m) {
    throw ValidationError(
        "gram_matrices: fewer than m distinct points (null-space design is "
        "rank deficient)");
  }

  KernelGram gram;
  gram.points = points;
  gram.Q.resize(M, M);
  gram.T.resize(M, order.m);
  for (Eigen::Index a = 0; a < M; ++a) {
    require_unit_interval(points[a], "gram_matrices");
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double value = kernel_R(points[a], points[b], order);
      gram.Q(a, b) = value;
      gram.Q(b, a) = value;
    }
    gram.T.row(a) = null_basis(order, points[a]).transpose();
  }
  return gram;
}

} // namespace sfda
