#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "sfda/data.hpp"
#include "sfda/rng.hpp"
#include "sfda/spline.hpp"

namespace sfda {

/// Equally spaced evaluation grid on [0,1], endpoints included.
struct EvalGrid {
  Eigen::VectorXd points;
};

EvalGrid make_grid(int size);

/// Multiplier-bootstrap replicates of the mean-difference curve.
struct BootstrapEnsemble {
  int B = 0;
  Eigen::MatrixXd delta_curves;  // B x G, rows are centered difference curves
  Eigen::VectorXd sigma_hat;     // G, floored pointwise standard errors
  Eigen::VectorXd kappa_b;       // B, variance-adjusted replicate statistics
};

/// Outcome of the two-sample mean comparison.
struct TestReport {
  EvalGrid grid;
  Eigen::VectorXd diff_estimate;
  Eigen::VectorXd band_lower;
  Eigen::VectorXd band_upper;
  double kappa_sq = 0.0;
  double critical_value = 0.0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  int B = 0;
  std::uint64_t seed = 0;
};

struct TestConfig {
  SplineOrder order{2};
  double alpha = 0.05;
  int B = 300;
  int grid_size = 101;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::uint64_t seed = 0;
  bool paper_literal_weights = false;
};

/// Two-point multiplier weights with mean 1 and variance 1:
///   1 - 2^(-1/2) with probability 2/3,  1 + 2^(1/2) with probability 1/3.
/// The literal variant shifts the low point to 1 + 2^(-1/2) for audit runs.
Eigen::VectorXd draw_multiplier_weights(int n, RngStream& stream,
                                        bool paper_literal = false);

/// Centered difference curve for explicit per-subject weight vectors:
///   (mu1_w - mu2_w) - base_diff evaluated on the grid.
Eigen::VectorXd weighted_diff_curve(const GroupSample& sample1,
                                    const GroupSample& sample2, double lambda1,
                                    double lambda2, SplineOrder order,
                                    const EvalGrid& grid,
                                    const Eigen::VectorXd& base_diff,
                                    const Eigen::VectorXd& weights1,
                                    const Eigen::VectorXd& weights2);

/// One centered bootstrap difference curve on the grid:
///   Delta_b = (mu1_b - mu2_b) - (mu1 - mu2)
/// with weighted refits of both groups at the supplied lambdas. The base
/// curves are the caller's unweighted fits evaluated on the grid.
Eigen::VectorXd bootstrap_replicate(const GroupSample& sample1,
                                    const GroupSample& sample2, double lambda1,
                                    double lambda2, SplineOrder order,
                                    const EvalGrid& grid,
                                    const Eigen::VectorXd& base_diff,
                                    RngStream& stream1, RngStream& stream2,
                                    bool paper_literal = false);

/// Pointwise normal-quantile band: diff -/+ z_{1-alpha/2} * sigma.
void pointwise_band(const Eigen::VectorXd& diff_estimate,
                    const Eigen::VectorXd& sigma_hat, double alpha,
                    Eigen::VectorXd& lower, Eigen::VectorXd& upper);

/// Order-statistic critical value: k-th smallest with k = ceil((1-alpha) B).
double bootstrap_critical_value(const Eigen::VectorXd& kappa_b, double alpha);

/// Add-one bootstrap p-value: (1 + #{kappa_b >= kappa}) / (B + 1).
double bootstrap_p_value(const Eigen::VectorXd& kappa_b, double kappa);

/// Global decision given a complete ensemble; fills kappa_sq,
/// critical_value, p_value and reject on the report.
void global_test(const Eigen::VectorXd& diff_estimate,
                 const BootstrapEnsemble& ensemble, const EvalGrid& grid,
                 double alpha, TestReport& report);

/// Full procedure: per-group GCV, unweighted fits, B weighted refits,
/// pointwise bands and the global decision. Deterministic given the seed,
/// independent of the worker count.
TestReport two_sample_test(const GroupSample& sample1, const GroupSample& sample2,
                           const TestConfig& config);

/// Ensemble built by two_sample_test; exposed for diagnostics and tests.
TestReport two_sample_test(const GroupSample& sample1, const GroupSample& sample2,
                           const TestConfig& config, BootstrapEnsemble& ensemble);

} // namespace sfda
