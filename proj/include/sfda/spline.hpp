#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sfda/data.hpp"
#include "sfda/kernel.hpp"

namespace sfda {

/// Fitted mean curve in representer form:
///   f(t) = sum_k d[k] t^k  +  sum_a c[a] R(knots[a], t)
/// knots are the observation times in input order; c has one entry per
/// observation and satisfies T'c = 0.
struct SplineFit {
  SplineOrder order{2};
  double lambda = 0.0;
  Eigen::VectorXd knots;
  Eigen::VectorXd c;
  Eigen::VectorXd d;
};

/// Solves the penalized least-squares problem
///   (1/2M) sum_ij u_i (y_ij - f(t_ij))^2 + (lambda/2) J(f,f)
/// via the stationarity system (Q + M*lambda*W^-1)c + Td = y, T'c = 0,
/// where W holds the per-observation weights (subject weight replicated
/// over that subject's observations; identity when weights are omitted).
SplineFit fit_penalized(const GroupSample& sample, double lambda, SplineOrder order);
SplineFit fit_penalized(const GroupSample& sample, double lambda, SplineOrder order,
                        const Eigen::VectorXd& subject_weights);

/// Evaluates the fitted curve at t in [0,1].
double evaluate(const SplineFit& fit, double t);

/// Evaluates the fitted curve at every grid point.
Eigen::VectorXd evaluate_on_grid(const SplineFit& fit, const Eigen::VectorXd& grid);

/// Trace of the smoothing matrix S(lambda) mapping y to fitted values at the
/// observation points (unweighted fit).
double smoother_trace(const GroupSample& sample, double lambda, SplineOrder order);

/// Generalized cross-validation score
///   [M^-1 ||y_hat - y||^2] / [M^-1 tr(I - S(lambda))]^2.
double gcv_score(const GroupSample& sample, double lambda, SplineOrder order);

/// Grid element minimizing the GCV score; ties resolved toward the larger
/// lambda. Grid points with a degenerate (near-interpolating) score are
/// skipped; throws if every point degenerates.
double select_lambda(const GroupSample& sample, SplineOrder order,
                     const std::vector<double>& grid);

/// Log-spaced lambda grid, endpoints included.
std::vector<double> default_lambda_grid(double lo = 1e-6, double hi = 1e2,
                                        int count = 40);

namespace detail {

/// Sorted distinct observation times plus the map from each observation to
/// its collapsed knot. Shared by every refit of the same sample.
struct CollapsePlan {
  Eigen::VectorXd x;          // K strictly increasing distinct times
  std::vector<int> knot_of;   // per observation
  Eigen::VectorXd mult;       // observations per collapsed knot
};

CollapsePlan make_collapse_plan(const Eigen::VectorXd& times);

/// Scratch buffers for repeated banded fits on a fixed collapse plan.
struct BandedWorkspace {
  Eigen::VectorXd wbar, ybar, q0, q1, q2, a0, a1, a2, dd, l1, l2, rhs, gamma,
      smoothed;
};

/// Weighted order-2 fit through the banded natural-spline system; produces
/// the same minimizer as the dense saddle solve. obs_weights may be empty
/// (all ones). Returns false on factorization breakdown.
bool fit_banded_m2(const CollapsePlan& plan, const Eigen::VectorXd& times,
                   const Eigen::VectorXd& values,
                   const Eigen::VectorXd& obs_weights, double lambda,
                   BandedWorkspace& ws, Eigen::VectorXd& c, Eigen::VectorXd& d);

/// Dense solve of the stationarity system; any order. Throws on singular
/// systems or when no factorization meets the residual contract.
void fit_dense(const Eigen::VectorXd& times, const Eigen::VectorXd& values,
               const Eigen::VectorXd& obs_weights, double lambda,
               SplineOrder order, Eigen::VectorXd& c, Eigen::VectorXd& d);

double trace_banded_m2(const CollapsePlan& plan, Eigen::Index total_obs,
                       double lambda);
double trace_dense(const Eigen::VectorXd& times, double lambda, SplineOrder order);

} // namespace detail

} // namespace sfda
