#pragma once

// Brute-force reference implementations, assembled from scratch and kept
// independent of the library code paths they check: Bernoulli polynomials
// from the Bernoulli-number expansion, the stationarity system built dense
// and solved by column-pivoted QR, and the smoothing matrix probed column
// by column.

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace oracle {

inline double bernoulli_number(int k) {
  switch (k) {
    case 0: return 1.0;
    case 1: return -0.5;
    case 2: return 1.0 / 6.0;
    case 4: return -1.0 / 30.0;
    case 6: return 1.0 / 42.0;
    case 8: return -1.0 / 30.0;
    case 10: return 5.0 / 66.0;
    case 12: return -691.0 / 2730.0;
    default:
      if (k % 2 == 1 && k > 1) return 0.0;
      throw std::invalid_argument("oracle: Bernoulli number out of range");
  }
}

inline double binomial(int n, int k) {
  double value = 1.0;
  for (int i = 1; i <= k; ++i) {
    value = value * (n - k + i) / i;
  }
  return value;
}

// B_r(t) = sum_{k=0}^{r} C(r,k) B_k t^(r-k), powers computed descending.
inline double bernoulli_poly(int r, double t) {
  double acc = 0.0;
  for (int k = 0; k <= r; ++k) {
    acc += binomial(r, k) * bernoulli_number(k) * std::pow(t, r - k);
  }
  return acc;
}

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

inline double kernel(double s, double t, int m) {
  return bernoulli_poly(m, s) * bernoulli_poly(m, t) /
             (factorial(m) * factorial(m)) -
         bernoulli_poly(2 * m, std::abs(s - t)) / factorial(2 * m);
}

struct FitResult {
  Eigen::VectorXd c;
  Eigen::VectorXd d;
  Eigen::VectorXd fitted;  // at the observation points
};

// Solves (Q + M lambda W^-1) c + T d = y, T'c = 0 as one dense system.
inline FitResult fit(const Eigen::VectorXd& times, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& obs_weights, double lambda, int m) {
  const Eigen::Index M = times.size();
  Eigen::MatrixXd Q(M, M), T(M, m);
  for (Eigen::Index a = 0; a < M; ++a) {
    for (Eigen::Index b = 0; b < M; ++b) Q(a, b) = kernel(times[a], times[b], m);
    for (int k = 0; k < m; ++k) T(a, k) = std::pow(times[a], k);
  }
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(M + m, M + m);
  system.topLeftCorner(M, M) = Q;
  for (Eigen::Index a = 0; a < M; ++a) {
    const double w = obs_weights.size() > 0 ? obs_weights[a] : 1.0;
    system(a, a) += static_cast<double>(M) * lambda / w;
  }
  system.topRightCorner(M, m) = T;
  system.bottomLeftCorner(m, M) = T.transpose();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(M + m);
  rhs.head(M) = y;
  const Eigen::VectorXd solution = system.colPivHouseholderQr().solve(rhs);

  FitResult result;
  result.c = solution.head(M);
  result.d = solution.tail(m);
  result.fitted.resize(M);
  for (Eigen::Index a = 0; a < M; ++a) {
    double value = 0.0;
    for (int k = 0; k < m; ++k) value += result.d[k] * std::pow(times[a], k);
    for (Eigen::Index b = 0; b < M; ++b) {
      value += result.c[b] * kernel(times[b], times[a], m);
    }
    result.fitted[a] = value;
  }
  return result;
}

// Smoothing-matrix trace by probing every unit response vector.
inline double smoother_trace(const Eigen::VectorXd& times, double lambda, int m) {
  const Eigen::Index M = times.size();
  double trace = 0.0;
  for (Eigen::Index j = 0; j < M; ++j) {
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(M);
    unit[j] = 1.0;
    trace += fit(times, unit, Eigen::VectorXd(), lambda, m).fitted[j];
  }
  return trace;
}

inline double gcv(const Eigen::VectorXd& times, const Eigen::VectorXd& y,
                  double lambda, int m) {
  const auto M = static_cast<double>(times.size());
  const FitResult result = fit(times, y, Eigen::VectorXd(), lambda, m);
  const double rss = (result.fitted - y).squaredNorm();
  const double denom = (M - smoother_trace(times, lambda, m)) / M;
  return (rss / M) / (denom * denom);
}

} // namespace oracle
