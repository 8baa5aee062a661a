#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sfda/data.hpp"
#include "sfda/inference.hpp"
#include "sfda/rng.hpp"

namespace sfda {

enum class Setting { c1, c2, c3 };
enum class BasisKind { sine, cosine };

/// Truncated Karhunen-Loeve eigensystem of one group's covariance:
/// basis sin(k pi t) or cos(k pi t), k = 1..values.size().
struct EigenSystem {
  Eigen::VectorXd values;
  BasisKind basis_kind = BasisKind::sine;
};

struct SimConfig {
  Setting setting = Setting::c1;
  int n1 = 200;
  int n2 = 100;
  int n_max = 10;                       // N_i ~ uniform{2,...,n_max}
  double delta = 0.0;
  double sigma_eps1 = 0.09;             // noise variances, not SDs
  double sigma_eps2 = 0.04;
  SplineOrder order{2};
  int B = 300;
  double alpha = 0.05;
  int mc_runs = 1;
  std::uint64_t seed = 0;
  int grid_size = 101;
  std::vector<double> lambda_grid = default_lambda_grid();
};

/// Aggregated Monte Carlo metrics.
struct MCSummary {
  double imse_mean = 0.0;
  double imse_sd = 0.0;
  Eigen::VectorXd coverage_grid;   // 51-point subgrid {0, 0.02, ..., 1}
  Eigen::VectorXd coverage;        // empirical CI coverage of the true difference
  double rejection_rate = 0.0;
  int runs = 0;                    // successful runs
  int failures = 0;
};

/// Group eigensystems of the three designs. Group 1 is common to all:
/// theta = (1, 0.25, 0.09, 0.05) with sine basis.
EigenSystem eigensystem_for(Setting setting, int group);

/// Group mean curves: mu1(t) = (2t - 0.3)^3 + 0.5 t and
/// mu2(t) = mu1(t) + delta n2^(-1/4) (e^t - (2t-1)^3 - 1).
double mean_function(int group, double t, double delta, int n2);

/// Karhunen-Loeve scores, one per retained eigenvalue. Zero eigenvalues are
/// skipped without consuming randomness.
Eigen::VectorXd draw_scores(const EigenSystem& system, RngStream& stream);

/// Latent trajectory value mu_g(t) + sum_k score_k phi_k(t).
double trajectory_value(const EigenSystem& system, const Eigen::VectorXd& scores,
                        int group, double t, double delta, int n2);

/// One subject's sparse record. Draw order (part of the determinism
/// contract): N_i, then scores, then times, then noise.
std::vector<std::pair<double, double>> gen_subject(Setting setting, int group,
                                                   const SimConfig& config,
                                                   RngStream& stream);

/// All subjects of one group as a GroupSample.
GroupSample gen_group(Setting setting, int group, const SimConfig& config,
                      RngStream& stream);

/// Integrated squared difference between two curves on a common grid.
double imse(const Eigen::VectorXd& grid, const Eigen::VectorXd& estimated_diff,
            const Eigen::VectorXd& true_diff);

/// Runs config.mc_runs independent replications of the full test and
/// aggregates IMSE, pointwise coverage and the rejection rate. Individual
/// run failures are dropped and counted; more than 1% failing is an error.
MCSummary run_mc(const SimConfig& config);

} // namespace sfda
