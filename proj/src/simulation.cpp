#include "sfda/simulation.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

#include "sfda/errors.hpp"
#include "sfda/numeric.hpp"
#include "sfda/parallel.hpp"

namespace sfda {

namespace {

double basis_value(BasisKind kind, int k, double t) {
  const double arg = static_cast<double>(k) * std::numbers::pi * t;
  return kind == BasisKind::sine ? std::sin(arg) : std::cos(arg);
}

Eigen::VectorXd coverage_subgrid() {
  Eigen::VectorXd grid(51);
  for (int i = 0; i < 51; ++i) grid[i] = 0.02 * i;
  grid[50] = 1.0;
  return grid;
}

// Linear interpolation of a curve sampled on an increasing grid.
double interp_on_grid(const Eigen::VectorXd& grid, const Eigen::VectorXd& values,
                      double t) {
  if (t <= grid[0]) return values[0];
  const Eigen::Index n = grid.size();
  if (t >= grid[n - 1]) return values[n - 1];
  Eigen::Index hi = 1;
  while (grid[hi] < t) ++hi;
  const double w = (t - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
  return (1.0 - w) * values[hi - 1] + w * values[hi];
}

} // namespace

EigenSystem eigensystem_for(Setting setting, int group) {
  if (group != 1 && group != 2) {
    throw ValidationError("eigensystem_for: group must be 1 or 2");
  }
  EigenSystem system;
  if (group == 1 || setting == Setting::c1) {
    system.values = Eigen::Vector4d(1.0, 0.25, 0.09, 0.05);
    system.basis_kind = BasisKind::sine;
  } else if (setting == Setting::c2) {
    system.values = Eigen::Vector4d(0.81, 0.36, 0.09, 0.01);
    system.basis_kind = BasisKind::sine;
  } else {
    system.values.resize(5);
    system.values << 0.64, 0.36, 0.16, 0.04, 0.01;
    system.basis_kind = BasisKind::cosine;
  }
  return system;
}

double mean_function(int group, double t, double delta, int n2) {
  if (group != 1 && group != 2) {
    throw ValidationError("mean_function: group must be 1 or 2");
  }
  const double base = std::pow(2.0 * t - 0.3, 3) + 0.5 * t;
  if (group == 1) return base;
  const double shape = std::exp(t) - std::pow(2.0 * t - 1.0, 3) - 1.0;
  return base + delta * std::pow(static_cast<double>(n2), -0.25) * shape;
}

Eigen::VectorXd draw_scores(const EigenSystem& system, RngStream& stream) {
  Eigen::VectorXd scores(system.values.size());
  for (Eigen::Index k = 0; k < system.values.size(); ++k) {
    scores[k] =
        system.values[k] > 0.0 ? std::sqrt(system.values[k]) * stream.normal() : 0.0;
  }
  return scores;
}

double trajectory_value(const EigenSystem& system, const Eigen::VectorXd& scores,
                        int group, double t, double delta, int n2) {
  double value = mean_function(group, t, delta, n2);
  for (Eigen::Index k = 0; k < scores.size(); ++k) {
    if (system.values[k] > 0.0) {
      value += scores[k] * basis_value(system.basis_kind, static_cast<int>(k) + 1, t);
    }
  }
  return value;
}

std::vector<std::pair<double, double>> gen_subject(Setting setting, int group,
                                                   const SimConfig& config,
                                                   RngStream& stream) {
  if (config.n_max < 2) {
    throw ValidationError("gen_subject: n_max must be at least 2");
  }
  const EigenSystem system = eigensystem_for(setting, group);
  const double noise_sd =
      std::sqrt(group == 1 ? config.sigma_eps1 : config.sigma_eps2);
  const int n_obs = stream.uniform_int(2, config.n_max);
  const Eigen::VectorXd scores = draw_scores(system, stream);
  std::vector<double> times(static_cast<std::size_t>(n_obs));
  for (auto& t : times) t = stream.uniform();
  std::vector<std::pair<double, double>> record;
  record.reserve(static_cast<std::size_t>(n_obs));
  for (double t : times) {
    const double x =
        trajectory_value(system, scores, group, t, config.delta, config.n2);
    record.emplace_back(t, x + noise_sd * stream.normal());
  }
  return record;
}

GroupSample gen_group(Setting setting, int group, const SimConfig& config,
                      RngStream& stream) {
  const int n = group == 1 ? config.n1 : config.n2;
  if (n < 1) {
    throw ValidationError("gen_group: subject count must be positive");
  }
  std::vector<double> times, values;
  std::vector<int> subject;
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto record = gen_subject(setting, group, config, stream);
    for (const auto& [t, y] : record) {
      times.push_back(t);
      values.push_back(y);
      subject.push_back(i);
    }
    labels.push_back("s" + std::to_string(i + 1));
  }
  return GroupSample::from_arrays(
      Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size())),
      Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())),
      std::move(subject), std::move(labels));
}

double imse(const Eigen::VectorXd& grid, const Eigen::VectorXd& estimated_diff,
            const Eigen::VectorXd& true_diff) {
  if (estimated_diff.size() != grid.size() || true_diff.size() != grid.size()) {
    throw ValidationError("imse: curves must share the evaluation grid");
  }
  const Eigen::VectorXd sq =
      (estimated_diff - true_diff).array().square().matrix();
  return trapezoid(grid, sq);
}

MCSummary run_mc(const SimConfig& config) {
  if (config.mc_runs < 1) {
    throw ValidationError("run_mc: mc_runs must be positive");
  }
  if (!(config.alpha > 0.0 && config.alpha < 1.0) || config.B < 20 ||
      config.grid_size < 11 || config.n_max < 2 || config.delta < 0.0) {
    throw ValidationError("run_mc: invalid configuration");
  }
  const Eigen::VectorXd subgrid = coverage_subgrid();

  struct RunResult {
    bool ok = false;
    bool reject = false;
    double imse = 0.0;
    Eigen::VectorXd covered;  // 0/1 per subgrid point
  };
  std::vector<RunResult> results(static_cast<std::size_t>(config.mc_runs));

  TestConfig test_config;
  test_config.order = config.order;
  test_config.alpha = config.alpha;
  test_config.B = config.B;
  test_config.grid_size = config.grid_size;
  test_config.lambda_grid = config.lambda_grid;

  parallel_for(config.mc_runs, [&](int run) {
    RunResult& out = results[static_cast<std::size_t>(run)];
    try {
      const std::uint64_t run_seed =
          derive_seed(config.seed, StreamTag::McRun, static_cast<std::uint64_t>(run));
      RngStream gen1 = RngStream::substream(run_seed, StreamTag::DataGeneration, 1);
      RngStream gen2 = RngStream::substream(run_seed, StreamTag::DataGeneration, 2);
      const GroupSample sample1 = gen_group(config.setting, 1, config, gen1);
      const GroupSample sample2 = gen_group(config.setting, 2, config, gen2);

      TestConfig run_config = test_config;
      run_config.seed = run_seed;
      const TestReport report = two_sample_test(sample1, sample2, run_config);

      const Eigen::Index G = report.grid.points.size();
      Eigen::VectorXd true_diff(G);
      for (Eigen::Index g = 0; g < G; ++g) {
        const double t = report.grid.points[g];
        true_diff[g] = mean_function(1, t, config.delta, config.n2) -
                       mean_function(2, t, config.delta, config.n2);
      }
      out.imse = imse(report.grid.points, report.diff_estimate, true_diff);
      out.reject = report.reject;
      out.covered.resize(subgrid.size());
      for (Eigen::Index i = 0; i < subgrid.size(); ++i) {
        const double t = subgrid[i];
        const double truth = mean_function(1, t, config.delta, config.n2) -
                             mean_function(2, t, config.delta, config.n2);
        const double lo = interp_on_grid(report.grid.points, report.band_lower, t);
        const double hi = interp_on_grid(report.grid.points, report.band_upper, t);
        out.covered[i] = (lo <= truth && truth <= hi) ? 1.0 : 0.0;
      }
      out.ok = true;
    } catch (const NumericError&) {
      out.ok = false;
    } catch (const ValidationError&) {
      out.ok = false;  // degenerate draw (e.g. too few distinct times)
    }
  });

  MCSummary summary;
  summary.coverage_grid = subgrid;
  summary.coverage = Eigen::VectorXd::Zero(subgrid.size());
  std::vector<double> imses;
  int rejections = 0;
  for (const RunResult& r : results) {
    if (!r.ok) {
      ++summary.failures;
      continue;
    }
    ++summary.runs;
    rejections += r.reject ? 1 : 0;
    imses.push_back(r.imse);
    summary.coverage += r.covered;
  }
  if (summary.failures > config.mc_runs / 100) {
    throw NumericError("run_mc: more than 1% of runs failed");
  }
  if (summary.runs == 0) {
    throw NumericError("run_mc: no successful runs");
  }
  summary.coverage /= static_cast<double>(summary.runs);
  summary.rejection_rate =
      static_cast<double>(rejections) / static_cast<double>(summary.runs);
  const Eigen::Map<Eigen::VectorXd> imse_vec(imses.data(),
                                             static_cast<Eigen::Index>(imses.size()));
  summary.imse_mean = imse_vec.mean();
  summary.imse_sd = sample_sd(imse_vec);
  return summary;
}

} // namespace sfda
