#include "sfda/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sfda/errors.hpp"
#include "sfda/numeric.hpp"
#include "sfda/parallel.hpp"

namespace sfda {

namespace {

constexpr double kWeightHigh = 1.0 + 1.4142135623730951;   // 1 + 2^(1/2)
constexpr double kWeightLow = 1.0 - 0.7071067811865476;    // 1 - 2^(-1/2)
constexpr double kWeightLowLiteral = 1.0 + 0.7071067811865476;

// Per-group state shared by all replicates: collapse plan plus the kernel
// and null-space designs evaluated on the output grid, so each refit needs
// one banded solve and two matrix-vector products.
struct PreparedGroup {
  const GroupSample* sample = nullptr;
  double lambda = 0.0;
  detail::CollapsePlan plan;
  Eigen::MatrixXd kernel_on_grid;  // G x M
  Eigen::MatrixXd basis_on_grid;   // G x m
  Eigen::VectorXd base_curve;      // G
  SplineOrder order{2};

  void prepare(const GroupSample& s, double lam, SplineOrder ord,
               const EvalGrid& grid) {
    sample = &s;
    lambda = lam;
    order = ord;
    plan = detail::make_collapse_plan(s.times());
    const Eigen::Index G = grid.points.size();
    const Eigen::Index M = s.size();
    kernel_on_grid.resize(G, M);
    basis_on_grid.resize(G, ord.m);
    for (Eigen::Index g = 0; g < G; ++g) {
      for (Eigen::Index a = 0; a < M; ++a) {
        kernel_on_grid(g, a) = kernel_R(s.times()[a], grid.points[g], ord);
      }
      basis_on_grid.row(g) = null_basis(ord, grid.points[g]).transpose();
    }
  }

  // Weighted refit evaluated on the grid. obs_weights empty = unweighted.
  Eigen::VectorXd refit_curve(const Eigen::VectorXd& obs_weights) const {
    Eigen::VectorXd c, d;
    bool ok = false;
    if (order.m == 2) {
      detail::BandedWorkspace ws;
      ok = detail::fit_banded_m2(plan, sample->times(), sample->values(),
                                 obs_weights, lambda, ws, c, d);
    }
    if (!ok) {
      detail::fit_dense(sample->times(), sample->values(), obs_weights, lambda,
                        order, c, d);
    }
    return kernel_on_grid * c + basis_on_grid * d;
  }
};

Eigen::VectorXd expand_weights(const GroupSample& sample,
                               const Eigen::VectorXd& per_subject) {
  Eigen::VectorXd w(sample.size());
  for (Eigen::Index a = 0; a < sample.size(); ++a) {
    w[a] = per_subject[sample.subject_of()[static_cast<std::size_t>(a)]];
  }
  return w;
}

int quantile_rank(double alpha, int B) {
  // k = ceil((1-alpha) * B) guarded against floating error in the product.
  const double target = (1.0 - alpha) * static_cast<double>(B);
  int k = static_cast<int>(std::ceil(target - 1e-9));
  return std::clamp(k, 1, B);
}

} // namespace

EvalGrid make_grid(int size) {
  if (size < 2) {
    throw ValidationError("make_grid: need at least two points");
  }
  EvalGrid grid;
  grid.points.resize(size);
  for (int i = 0; i < size; ++i) {
    grid.points[i] = static_cast<double>(i) / static_cast<double>(size - 1);
  }
  return grid;
}

Eigen::VectorXd draw_multiplier_weights(int n, RngStream& stream,
                                        bool paper_literal) {
  if (n < 1) {
    throw ValidationError("draw_multiplier_weights: n must be positive");
  }
  const double low = paper_literal ? kWeightLowLiteral : kWeightLow;
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = (stream.uniform() < 2.0 / 3.0) ? low : kWeightHigh;
  }
  return w;
}

Eigen::VectorXd weighted_diff_curve(const GroupSample& sample1,
                                    const GroupSample& sample2, double lambda1,
                                    double lambda2, SplineOrder order,
                                    const EvalGrid& grid,
                                    const Eigen::VectorXd& base_diff,
                                    const Eigen::VectorXd& weights1,
                                    const Eigen::VectorXd& weights2) {
  const SplineFit fit1 = fit_penalized(sample1, lambda1, order, weights1);
  const SplineFit fit2 = fit_penalized(sample2, lambda2, order, weights2);
  Eigen::VectorXd curve(grid.points.size());
  for (Eigen::Index g = 0; g < grid.points.size(); ++g) {
    curve[g] = evaluate(fit1, grid.points[g]) - evaluate(fit2, grid.points[g]);
  }
  return curve - base_diff;
}

Eigen::VectorXd bootstrap_replicate(const GroupSample& sample1,
                                    const GroupSample& sample2, double lambda1,
                                    double lambda2, SplineOrder order,
                                    const EvalGrid& grid,
                                    const Eigen::VectorXd& base_diff,
                                    RngStream& stream1, RngStream& stream2,
                                    bool paper_literal) {
  const Eigen::VectorXd w1 =
      draw_multiplier_weights(sample1.subjects(), stream1, paper_literal);
  const Eigen::VectorXd w2 =
      draw_multiplier_weights(sample2.subjects(), stream2, paper_literal);
  return weighted_diff_curve(sample1, sample2, lambda1, lambda2, order, grid,
                             base_diff, w1, w2);
}

void pointwise_band(const Eigen::VectorXd& diff_estimate,
                    const Eigen::VectorXd& sigma_hat, double alpha,
                    Eigen::VectorXd& lower, Eigen::VectorXd& upper) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("pointwise_band: alpha must lie in (0,1)");
  }
  const double z = normal_quantile(1.0 - alpha / 2.0);
  lower = diff_estimate - z * sigma_hat;
  upper = diff_estimate + z * sigma_hat;
}

double bootstrap_critical_value(const Eigen::VectorXd& kappa_b, double alpha) {
  const int B = static_cast<int>(kappa_b.size());
  std::vector<double> sorted(kappa_b.data(), kappa_b.data() + B);
  std::stable_sort(sorted.begin(), sorted.end());
  return sorted[static_cast<std::size_t>(quantile_rank(alpha, B) - 1)];
}

double bootstrap_p_value(const Eigen::VectorXd& kappa_b, double kappa) {
  const int exceed = static_cast<int>((kappa_b.array() >= kappa).count());
  return (1.0 + exceed) / (static_cast<double>(kappa_b.size()) + 1.0);
}

void global_test(const Eigen::VectorXd& diff_estimate,
                 const BootstrapEnsemble& ensemble, const EvalGrid& grid,
                 double alpha, TestReport& report) {
  if (ensemble.B < 20) {
    throw ValidationError("global_test: fewer than 20 bootstrap replicates");
  }
  const Eigen::VectorXd standardized =
      (diff_estimate.array() / ensemble.sigma_hat.array()).square();
  report.kappa_sq = trapezoid(grid.points, standardized);
  report.critical_value = bootstrap_critical_value(ensemble.kappa_b, alpha);
  const double kappa = std::sqrt(report.kappa_sq);
  report.p_value = bootstrap_p_value(ensemble.kappa_b, kappa);
  report.reject = kappa > report.critical_value;
}

TestReport two_sample_test(const GroupSample& sample1, const GroupSample& sample2,
                           const TestConfig& config) {
  BootstrapEnsemble ensemble;
  return two_sample_test(sample1, sample2, config, ensemble);
}

TestReport two_sample_test(const GroupSample& sample1, const GroupSample& sample2,
                           const TestConfig& config, BootstrapEnsemble& ensemble) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
    throw ValidationError("two_sample_test: alpha must lie in (0,1)");
  }
  if (config.B < 20) {
    throw ValidationError("two_sample_test: need at least 20 replicates");
  }
  if (config.grid_size < 11) {
    throw ValidationError("two_sample_test: grid_size must be at least 11");
  }

  TestReport report;
  report.grid = make_grid(config.grid_size);
  report.alpha = config.alpha;
  report.B = config.B;
  report.seed = config.seed;
  report.lambda1 = select_lambda(sample1, config.order, config.lambda_grid);
  report.lambda2 = select_lambda(sample2, config.order, config.lambda_grid);

  PreparedGroup group1, group2;
  group1.prepare(sample1, report.lambda1, config.order, report.grid);
  group2.prepare(sample2, report.lambda2, config.order, report.grid);
  group1.base_curve = group1.refit_curve(Eigen::VectorXd());
  group2.base_curve = group2.refit_curve(Eigen::VectorXd());
  report.diff_estimate = group1.base_curve - group2.base_curve;

  const Eigen::Index G = report.grid.points.size();
  ensemble.B = config.B;
  ensemble.delta_curves.resize(config.B, G);
  parallel_for(config.B, [&](int b) {
    RngStream s1 = RngStream::substream(config.seed, StreamTag::BootstrapWeights,
                                        static_cast<std::uint64_t>(b), 1);
    RngStream s2 = RngStream::substream(config.seed, StreamTag::BootstrapWeights,
                                        static_cast<std::uint64_t>(b), 2);
    const Eigen::VectorXd u1 = draw_multiplier_weights(
        sample1.subjects(), s1, config.paper_literal_weights);
    const Eigen::VectorXd u2 = draw_multiplier_weights(
        sample2.subjects(), s2, config.paper_literal_weights);
    const Eigen::VectorXd curve1 =
        group1.refit_curve(expand_weights(sample1, u1));
    const Eigen::VectorXd curve2 =
        group2.refit_curve(expand_weights(sample2, u2));
    ensemble.delta_curves.row(b) =
        (curve1 - curve2 - report.diff_estimate).transpose();
  });

  ensemble.sigma_hat.resize(G);
  for (Eigen::Index g = 0; g < G; ++g) {
    ensemble.sigma_hat[g] = sample_sd(ensemble.delta_curves.col(g));
  }
  double floor = 1e-8 * ensemble.sigma_hat.maxCoeff();
  if (!(floor > 0.0)) floor = std::numeric_limits<double>::min();
  ensemble.sigma_hat = ensemble.sigma_hat.cwiseMax(floor);

  ensemble.kappa_b.resize(config.B);
  for (int b = 0; b < config.B; ++b) {
    const Eigen::VectorXd standardized =
        (ensemble.delta_curves.row(b).transpose().array() /
         ensemble.sigma_hat.array())
            .square();
    ensemble.kappa_b[b] = std::sqrt(trapezoid(report.grid.points, standardized));
  }

  pointwise_band(report.diff_estimate, ensemble.sigma_hat, config.alpha,
                 report.band_lower, report.band_upper);
  global_test(report.diff_estimate, ensemble, report.grid, config.alpha, report);
  return report;
}

} // namespace sfda
