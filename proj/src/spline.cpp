#include "sfda/spline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sfda/errors.hpp"

namespace sfda {

namespace detail {

CollapsePlan make_collapse_plan(const Eigen::VectorXd& times) {
  const Eigen::Index M = times.size();
  std::vector<int> order(static_cast<std::size_t>(M));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return times[a] < times[b]; });

  CollapsePlan plan;
  plan.knot_of.assign(static_cast<std::size_t>(M), 0);
  std::vector<double> x;
  std::vector<double> mult;
  x.reserve(static_cast<std::size_t>(M));
  for (int idx : order) {
    if (x.empty() || times[idx] != x.back()) {
      x.push_back(times[idx]);
      mult.push_back(0.0);
    }
    plan.knot_of[static_cast<std::size_t>(idx)] = static_cast<int>(x.size()) - 1;
    mult.back() += 1.0;
  }
  plan.x = Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  plan.mult =
      Eigen::Map<Eigen::VectorXd>(mult.data(), static_cast<Eigen::Index>(mult.size()));
  return plan;
}

namespace {

// Bands of G = R + p * D' Wbar^-1 D for the natural-spline system on K
// distinct knots: R is the usual tridiagonal roughness matrix, D the
// second-divided-difference operator, Wbar the collapsed weights.
void assemble_bands(const Eigen::VectorXd& x, const Eigen::VectorXd& wbar,
                    double p, BandedWorkspace& ws) {
  const Eigen::Index K = x.size();
  const Eigen::Index n = K - 2;
  ws.q0.resize(n);
  ws.q1.resize(n);
  ws.q2.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double hl = x[j + 1] - x[j];
    const double hr = x[j + 2] - x[j + 1];
    ws.q0[j] = 1.0 / hl;
    ws.q1[j] = -1.0 / hl - 1.0 / hr;
    ws.q2[j] = 1.0 / hr;
  }
  ws.a0.resize(n);
  ws.a1.resize(n > 0 ? n - 1 : 0);
  ws.a2.resize(n > 1 ? n - 2 : 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double hl = x[j + 1] - x[j];
    const double hr = x[j + 2] - x[j + 1];
    double diag = (hl + hr) / 3.0;
    diag += p * (ws.q0[j] * ws.q0[j] / wbar[j] + ws.q1[j] * ws.q1[j] / wbar[j + 1] +
                 ws.q2[j] * ws.q2[j] / wbar[j + 2]);
    ws.a0[j] = diag;
    if (j + 1 < n) {
      double off = hr / 6.0;
      off += p * (ws.q1[j] * ws.q0[j + 1] / wbar[j + 1] +
                  ws.q2[j] * ws.q1[j + 1] / wbar[j + 2]);
      ws.a1[j] = off;
    }
    if (j + 2 < n) {
      ws.a2[j] = p * ws.q2[j] * ws.q0[j + 2] / wbar[j + 2];
    }
  }
}

// LDL' factorization of the pentadiagonal band; false when a pivot fails.
bool factor_bands(BandedWorkspace& ws) {
  const Eigen::Index n = ws.a0.size();
  ws.dd.resize(n);
  ws.l1.resize(n > 0 ? n - 1 : 0);
  ws.l2.resize(n > 1 ? n - 2 : 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double di = ws.a0[i];
    if (i >= 1) di -= ws.l1[i - 1] * ws.l1[i - 1] * ws.dd[i - 1];
    if (i >= 2) di -= ws.l2[i - 2] * ws.l2[i - 2] * ws.dd[i - 2];
    if (!(di > 0.0) || !std::isfinite(di)) return false;
    ws.dd[i] = di;
    if (i + 1 < n) {
      double v = ws.a1[i];
      if (i >= 1) v -= ws.l1[i - 1] * ws.l2[i - 1] * ws.dd[i - 1];
      ws.l1[i] = v / di;
    }
    if (i + 2 < n) {
      ws.l2[i] = ws.a2[i] / di;
    }
  }
  return true;
}

void solve_bands(const BandedWorkspace& ws, Eigen::VectorXd& b) {
  const Eigen::Index n = ws.dd.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i >= 1) b[i] -= ws.l1[i - 1] * b[i - 1];
    if (i >= 2) b[i] -= ws.l2[i - 2] * b[i - 2];
  }
  for (Eigen::Index i = 0; i < n; ++i) b[i] /= ws.dd[i];
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (i + 1 < n) b[i] -= ws.l1[i] * b[i + 1];
    if (i + 2 < n) b[i] -= ws.l2[i] * b[i + 2];
  }
}

} // namespace

bool fit_banded_m2(const CollapsePlan& plan, const Eigen::VectorXd& times,
                   const Eigen::VectorXd& values,
                   const Eigen::VectorXd& obs_weights, double lambda,
                   BandedWorkspace& ws, Eigen::VectorXd& c, Eigen::VectorXd& d) {
  const Eigen::Index M = times.size();
  const Eigen::Index K = plan.x.size();
  const double p = static_cast<double>(M) * lambda;
  const bool weighted = obs_weights.size() > 0;

  ws.wbar.setZero(K);
  ws.ybar.setZero(K);
  for (Eigen::Index a = 0; a < M; ++a) {
    const int k = plan.knot_of[static_cast<std::size_t>(a)];
    const double u = weighted ? obs_weights[a] : 1.0;
    ws.wbar[k] += u;
    ws.ybar[k] += u * values[a];
  }
  ws.ybar.array() /= ws.wbar.array();

  // Fitted values at the collapsed knots.
  ws.smoothed = ws.ybar;
  const Eigen::Index n = K - 2;
  if (n > 0) {
    assemble_bands(plan.x, ws.wbar, p, ws);
    ws.rhs.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      // Second divided difference of ybar; exact zero on constant data.
      ws.rhs[j] = (ws.ybar[j + 2] - ws.ybar[j + 1]) / (plan.x[j + 2] - plan.x[j + 1]) -
                  (ws.ybar[j + 1] - ws.ybar[j]) / (plan.x[j + 1] - plan.x[j]);
    }
    if (!factor_bands(ws)) return false;
    ws.gamma = ws.rhs;
    solve_bands(ws, ws.gamma);
    for (Eigen::Index j = 0; j < n; ++j) {
      ws.smoothed[j] -= p * ws.q0[j] * ws.gamma[j] / ws.wbar[j];
      ws.smoothed[j + 1] -= p * ws.q1[j] * ws.gamma[j] / ws.wbar[j + 1];
      ws.smoothed[j + 2] -= p * ws.q2[j] * ws.gamma[j] / ws.wbar[j + 2];
    }
  }
  if (!ws.smoothed.allFinite()) return false;

  c.resize(M);
  for (Eigen::Index a = 0; a < M; ++a) {
    const double u = weighted ? obs_weights[a] : 1.0;
    const double fitted = ws.smoothed[plan.knot_of[static_cast<std::size_t>(a)]];
    c[a] = u * (values[a] - fitted) / p;
  }

  // The kernel-form curve differs from the natural spline by an element of
  // the null space only, so matching values at the extreme knots pins d.
  const SplineOrder order(2);
  const double x_lo = plan.x[0];
  const double x_hi = plan.x[K - 1];
  double r_lo = 0.0, r_hi = 0.0;
  for (Eigen::Index a = 0; a < M; ++a) {
    r_lo += c[a] * kernel_R(times[a], x_lo, order);
    r_hi += c[a] * kernel_R(times[a], x_hi, order);
  }
  const double g_lo = ws.smoothed[0] - r_lo;
  const double g_hi = ws.smoothed[K - 1] - r_hi;
  d.resize(2);
  d[1] = (g_hi - g_lo) / (x_hi - x_lo);
  d[0] = g_lo - d[1] * x_lo;
  return d.allFinite() && c.allFinite();
}

void fit_dense(const Eigen::VectorXd& times, const Eigen::VectorXd& values,
               const Eigen::VectorXd& obs_weights, double lambda,
               SplineOrder order, Eigen::VectorXd& c, Eigen::VectorXd& d) {
  const Eigen::Index M = times.size();
  const int m = order.m;
  const KernelGram gram = gram_matrices(times, order);
  const double p = static_cast<double>(M) * lambda;

  Eigen::MatrixXd A = gram.Q;
  if (obs_weights.size() > 0) {
    A.diagonal() += p * obs_weights.cwiseInverse();
  } else {
    A.diagonal().array() += p;
  }

  const double y_scale = 1.0 + values.cwiseAbs().maxCoeff();
  const double tol = 1e-8;

  auto kkt_residual = [&](const Eigen::VectorXd& cc, const Eigen::VectorXd& dd) {
    const Eigen::VectorXd r1 = A * cc + gram.T * dd - values;
    const Eigen::VectorXd r2 = gram.T.transpose() * cc;
    return std::max(r1.cwiseAbs().maxCoeff(), r2.cwiseAbs().maxCoeff()) / y_scale;
  };

  // Schur-complement solve on the SPD block, then an augmented LU retry.
  {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() == Eigen::Success) {
      const Eigen::MatrixXd AinvT = ldlt.solve(gram.T);
      const Eigen::VectorXd Ainvy = ldlt.solve(values);
      const Eigen::MatrixXd schur = gram.T.transpose() * AinvT;
      Eigen::FullPivLU<Eigen::MatrixXd> schur_lu(schur);
      if (schur_lu.isInvertible()) {
        d = schur_lu.solve(gram.T.transpose() * Ainvy);
        c = Ainvy - AinvT * d;
        if (kkt_residual(c, d) < tol) return;
      }
    }
  }
  {
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(M + m, M + m);
    aug.topLeftCorner(M, M) = A;
    aug.topRightCorner(M, m) = gram.T;
    aug.bottomLeftCorner(m, M) = gram.T.transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(M + m);
    rhs.head(M) = values;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(aug);
    if (!lu.isInvertible()) {
      throw NumericError("fit_penalized: singular stationarity system");
    }
    const Eigen::VectorXd sol = lu.solve(rhs);
    c = sol.head(M);
    d = sol.tail(m);
    if (kkt_residual(c, d) >= tol) {
      throw NumericError("fit_penalized: stationarity residual exceeds tolerance");
    }
  }
}

double trace_banded_m2(const CollapsePlan& plan, Eigen::Index total_obs,
                       double lambda) {
  const Eigen::Index K = plan.x.size();
  if (K == 2) return 2.0;
  const double p = static_cast<double>(total_obs) * lambda;
  BandedWorkspace ws;
  assemble_bands(plan.x, plan.mult, p, ws);
  // Keep the P = D' Wbar^-1 D bands before they are folded into G.
  const Eigen::Index n = K - 2;
  Eigen::VectorXd p0(n), p1(n > 0 ? n - 1 : 0), p2(n > 1 ? n - 2 : 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    p0[j] = ws.q0[j] * ws.q0[j] / plan.mult[j] +
            ws.q1[j] * ws.q1[j] / plan.mult[j + 1] +
            ws.q2[j] * ws.q2[j] / plan.mult[j + 2];
    if (j + 1 < n) {
      p1[j] = ws.q1[j] * ws.q0[j + 1] / plan.mult[j + 1] +
              ws.q2[j] * ws.q1[j + 1] / plan.mult[j + 2];
    }
    if (j + 2 < n) {
      p2[j] = ws.q2[j] * ws.q0[j + 2] / plan.mult[j + 2];
    }
  }
  if (!factor_bands(ws)) {
    throw NumericError("smoother_trace: banded factorization failed");
  }
  double tr_GinvP = 0.0;
  Eigen::VectorXd col(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    col.setZero();
    col[j] = p0[j];
    if (j >= 1) col[j - 1] = p1[j - 1];
    if (j + 1 < n) col[j + 1] = p1[j];
    if (j >= 2) col[j - 2] = p2[j - 2];
    if (j + 2 < n) col[j + 2] = p2[j];
    solve_bands(ws, col);
    tr_GinvP += col[j];
  }
  return static_cast<double>(K) - p * tr_GinvP;
}

double trace_dense(const Eigen::VectorXd& times, double lambda, SplineOrder order) {
  const Eigen::Index M = times.size();
  const KernelGram gram = gram_matrices(times, order);
  Eigen::MatrixXd A = gram.Q;
  A.diagonal().array() += static_cast<double>(M) * lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) {
    throw NumericError("smoother_trace: factorization failed");
  }
  const Eigen::MatrixXd Ainv = ldlt.solve(Eigen::MatrixXd::Identity(M, M));
  const Eigen::MatrixXd X = ldlt.solve(gram.T);
  const Eigen::MatrixXd schur = gram.T.transpose() * X;
  Eigen::FullPivLU<Eigen::MatrixXd> schur_lu(schur);
  if (!schur_lu.isInvertible()) {
    throw NumericError("smoother_trace: null-space design is rank deficient");
  }
  const double correction = schur_lu.solve(X.transpose() * X).trace();
  const double p = static_cast<double>(M) * lambda;
  return static_cast<double>(M) - p * (Ainv.trace() - correction);
}

} // namespace detail

namespace {

Eigen::VectorXd expand_subject_weights(const GroupSample& sample,
                                       const Eigen::VectorXd& subject_weights) {
  if (subject_weights.size() != sample.subjects()) {
    throw ValidationError("fit_penalized: one weight per subject required");
  }
  if ((subject_weights.array() <= 0.0).any()) {
    throw ValidationError("fit_penalized: subject weights must be positive");
  }
  Eigen::VectorXd w(sample.size());
  for (Eigen::Index a = 0; a < sample.size(); ++a) {
    w[a] = subject_weights[sample.subject_of()[static_cast<std::size_t>(a)]];
  }
  return w;
}

SplineFit fit_impl(const GroupSample& sample, double lambda, SplineOrder order,
                   const Eigen::VectorXd& obs_weights) {
  if (!(lambda > 0.0)) {
    throw ValidationError("fit_penalized: lambda must be positive");
  }
  if (sample.size() < order.m) {
    throw ValidationError("fit_penalized: need at least m observations");
  }
  SplineFit fit;
  fit.order = order;
  fit.lambda = lambda;
  fit.knots = sample.times();

  const detail::CollapsePlan plan = detail::make_collapse_plan(sample.times());
  if (plan.x.size() < order.m) {
    throw ValidationError(
        "fit_penalized: fewer than m distinct observation times");
  }
  if (order.m == 2) {
    detail::BandedWorkspace ws;
    if (detail::fit_banded_m2(plan, sample.times(), sample.values(), obs_weights,
                              lambda, ws, fit.c, fit.d)) {
      return fit;
    }
  }
  detail::fit_dense(sample.times(), sample.values(), obs_weights, lambda, order,
                    fit.c, fit.d);
  return fit;
}

} // namespace

SplineFit fit_penalized(const GroupSample& sample, double lambda, SplineOrder order) {
  return fit_impl(sample, lambda, order, Eigen::VectorXd());
}

SplineFit fit_penalized(const GroupSample& sample, double lambda, SplineOrder order,
                        const Eigen::VectorXd& subject_weights) {
  return fit_impl(sample, lambda, order,
                  expand_subject_weights(sample, subject_weights));
}

double evaluate(const SplineFit& fit, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ValidationError("evaluate: t outside [0,1]");
  }
  double acc = 0.0;
  double power = 1.0;
  for (Eigen::Index k = 0; k < fit.d.size(); ++k) {
    acc += fit.d[k] * power;
    power *= t;
  }
  for (Eigen::Index a = 0; a < fit.c.size(); ++a) {
    acc += fit.c[a] * kernel_R(fit.knots[a], t, fit.order);
  }
  return acc;
}

Eigen::VectorXd evaluate_on_grid(const SplineFit& fit, const Eigen::VectorXd& grid) {
  Eigen::VectorXd out(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) out[g] = evaluate(fit, grid[g]);
  return out;
}

double smoother_trace(const GroupSample& sample, double lambda, SplineOrder order) {
  if (!(lambda > 0.0)) {
    throw ValidationError("smoother_trace: lambda must be positive");
  }
  const detail::CollapsePlan plan = detail::make_collapse_plan(sample.times());
  if (plan.x.size() < order.m) {
    throw ValidationError(
        "smoother_trace: fewer than m distinct observation times");
  }
  if (order.m == 2) {
    return detail::trace_banded_m2(plan, sample.size(), lambda);
  }
  return detail::trace_dense(sample.times(), lambda, order);
}

double gcv_score(const GroupSample& sample, double lambda, SplineOrder order) {
  const SplineFit fit = fit_penalized(sample, lambda, order);
  const double M = static_cast<double>(sample.size());
  // Residuals at the knots follow from the stationarity system: y - y_hat =
  // M*lambda*W^-1*c, with W = I for the GCV fit.
  const double rss = (M * lambda * fit.c).squaredNorm();
  const double denom_tr = M - smoother_trace(sample, lambda, order);
  if (denom_tr <= 1e-10) {
    throw NumericError("gcv_score: interpolating fit (tr(I - S) ~ 0)");
  }
  return (rss / M) / ((denom_tr / M) * (denom_tr / M));
}

double select_lambda(const GroupSample& sample, SplineOrder order,
                     const std::vector<double>& grid) {
  if (grid.empty()) {
    throw ValidationError("select_lambda: empty grid");
  }
  double best_lambda = 0.0;
  double best_score = std::numeric_limits<double>::infinity();
  bool any = false;
  for (double lambda : grid) {
    if (!(lambda > 0.0)) {
      throw ValidationError("select_lambda: grid values must be positive");
    }
    double score;
    try {
      score = gcv_score(sample, lambda, order);
    } catch (const NumericError&) {
      continue;  // degenerate at this lambda
    }
    if (!any || score < best_score ||
        (score == best_score && lambda > best_lambda)) {
      best_score = score;
      best_lambda = lambda;
      any = true;
    }
  }
  if (!any) {
    throw NumericError("select_lambda: every grid point degenerated");
  }
  return best_lambda;
}

std::vector<double> default_lambda_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
    throw ValidationError("default_lambda_grid: need 0 < lo <= hi, count >= 1");
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = (std::log(hi) - std::log(lo)) / (count - 1);
  for (int i = 0; i < count; ++i) {
    grid[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + step * i);
  }
  return grid;
}

} // namespace sfda
