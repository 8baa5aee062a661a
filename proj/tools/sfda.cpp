#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfda/errors.hpp"
#include "sfda/io.hpp"

namespace {

using namespace sfda;

std::string sibling_path(const std::string& path, const std::string& suffix) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return path + suffix;
  }
  return path.substr(0, dot) + suffix;
}

void add_common_options(CLI::App* cmd, RunConfig& config) {
  cmd->add_option("--m", config.m, "Penalized derivative order")
      ->check(CLI::Range(1, 6));
  cmd->add_option("--grid-size", config.grid_size, "Evaluation grid size");
  cmd->add_option("--lambda-min", config.lambda_min, "Smallest GCV grid value");
  cmd->add_option("--lambda-max", config.lambda_max, "Largest GCV grid value");
  cmd->add_option("--lambda-count", config.lambda_count, "GCV grid size");
  cmd->add_option("--seed", config.seed, "Random seed");
}

std::vector<double> lambda_grid_from(const RunConfig& config) {
  return default_lambda_grid(config.lambda_min, config.lambda_max,
                             config.lambda_count);
}

int run_fit(const RunConfig& config) {
  auto [sample1, sample2] = parse_csv(config.input_path, config.rescale_time);
  const GroupSample& sample = config.group == 1 ? sample1 : sample2;
  const SplineOrder order(config.m);
  const double lambda = config.lambda
                            ? *config.lambda
                            : select_lambda(sample, order, lambda_grid_from(config));
  const SplineFit fit = fit_penalized(sample, lambda, order);
  const EvalGrid grid = make_grid(config.grid_size);
  const Eigen::VectorXd curve = evaluate_on_grid(fit, grid.points);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!config.output_path.empty()) {
    file.open(config.output_path);
    if (!file) {
      throw ValidationError("fit: cannot open '" + config.output_path + "'");
    }
    out = &file;
  }
  out->precision(10);
  *out << "t,mu_hat\n";
  for (Eigen::Index g = 0; g < grid.points.size(); ++g) {
    *out << grid.points[g] << ',' << curve[g] << '\n';
  }
  std::cerr << "group " << config.group << ": n=" << sample.subjects()
            << " M=" << sample.size() << " lambda=" << lambda
            << (config.lambda ? " (given)" : " (GCV)") << '\n';
  return 0;
}

int run_test(const RunConfig& config) {
  auto [sample1, sample2] = parse_csv(config.input_path, config.rescale_time);
  if (config.sparsify_range) {
    const auto [n_min, n_max] = *config.sparsify_range;
    RngStream stream1 = RngStream::substream(config.seed, StreamTag::Sparsify, 1);
    RngStream stream2 = RngStream::substream(config.seed, StreamTag::Sparsify, 2);
    sample1 = sparsify(sample1, n_min, n_max, stream1);
    sample2 = sparsify(sample2, n_min, n_max, stream2);
  }
  TestConfig test_config;
  test_config.order = SplineOrder(config.m);
  test_config.alpha = config.alpha;
  test_config.B = config.B;
  test_config.grid_size = config.grid_size;
  test_config.lambda_grid = lambda_grid_from(config);
  test_config.seed = config.seed;
  test_config.paper_literal_weights = config.paper_literal_weights;

  const TestReport report = two_sample_test(sample1, sample2, test_config);
  if (!config.output_path.empty()) {
    emit_report(report, config.output_path);
  }
  std::cout << "lambda1=" << report.lambda1 << " lambda2=" << report.lambda2
            << '\n'
            << "kappa=" << std::sqrt(report.kappa_sq)
            << " critical=" << report.critical_value
            << " p=" << report.p_value << '\n'
            << (report.reject ? "reject equal means at alpha="
                              : "fail to reject at alpha=")
            << report.alpha << '\n';
  return 0;
}

int run_simulate(const RunConfig& config) {
  SimConfig sim;
  sim.setting = config.setting;
  sim.n1 = config.n1;
  sim.n2 = config.n2;
  sim.n_max = config.n_max;
  sim.delta = config.delta;
  sim.order = SplineOrder(config.m);
  sim.B = config.B;
  sim.alpha = config.alpha;
  sim.mc_runs = config.runs;
  sim.seed = config.seed;
  sim.grid_size = config.grid_size;
  sim.lambda_grid = lambda_grid_from(config);

  const MCSummary summary = run_mc(sim);
  std::cout << "setting=" << setting_name(sim.setting) << " n1=" << sim.n1
            << " n2=" << sim.n2 << " N_max=" << sim.n_max
            << " delta=" << sim.delta << '\n'
            << "imse=" << summary.imse_mean << " (" << summary.imse_sd << ")"
            << " rejection_rate=" << summary.rejection_rate << " runs="
            << summary.runs << " failures=" << summary.failures << '\n';
  if (!config.output_path.empty()) {
    write_mc_summary_csv(sim, summary, config.output_path);
    write_coverage_csv(summary, sibling_path(config.output_path, "_coverage.csv"));
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-sample mean-function inference for sparse functional data"};
  app.require_subcommand(1);
  RunConfig config;

  CLI::App* fit = app.add_subcommand("fit", "Fit one group's mean curve");
  fit->add_option("--input", config.input_path, "Long CSV (group,subject,t,y)")
      ->required();
  fit->add_option("--group", config.group, "Group to fit (1 or 2)")
      ->check(CLI::Range(1, 2));
  double lambda_value = 0.0;
  CLI::Option* lambda_opt =
      fit->add_option("--lambda", lambda_value, "Fixed smoothing parameter");
  fit->add_flag("--gcv", "Select lambda by GCV (default)");
  fit->add_flag("--rescale-time", config.rescale_time,
                "Affinely map observed times onto [0,1]");
  fit->add_option("--output", config.output_path, "Fitted curve CSV");
  add_common_options(fit, config);

  CLI::App* test = app.add_subcommand("test", "Two-sample mean comparison");
  test->add_option("--input", config.input_path, "Long CSV (group,subject,t,y)")
      ->required();
  test->add_option("--alpha", config.alpha, "Significance level");
  test->add_option("--B", config.B, "Bootstrap replicates");
  test->add_flag("--rescale-time", config.rescale_time,
                 "Affinely map observed times onto [0,1]");
  std::vector<int> sparsify_args;
  test->add_option("--sparsify", sparsify_args,
                   "Subsample each subject to between MIN and MAX observations")
      ->expected(2);
  test->add_flag("--paper-literal-weights", config.paper_literal_weights,
                 "Audit variant of the multiplier-weight distribution");
  test->add_option("--output", config.output_path, "Report JSON path");
  add_common_options(test, config);

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo study");
  std::string setting_text = "c1";
  simulate->add_option("--setting", setting_text, "Design: c1, c2 or c3");
  simulate->add_option("--n1", config.n1, "Group 1 subject count");
  simulate->add_option("--n2", config.n2, "Group 2 subject count");
  simulate->add_option("--nmax", config.n_max, "Largest per-subject count");
  simulate->add_option("--delta", config.delta, "Mean-difference size");
  simulate->add_option("--runs", config.runs, "Monte Carlo replications");
  simulate->add_option("--alpha", config.alpha, "Significance level");
  simulate->add_option("--B", config.B, "Bootstrap replicates");
  simulate->add_option("--output", config.output_path, "Summary CSV path");
  add_common_options(simulate, config);

  try {
    app.parse(argc, argv);
    if (fit->parsed()) {
      config.command = Command::fit;
      if (lambda_opt->count() > 0) config.lambda = lambda_value;
      return run_fit(config);
    }
    if (test->parsed()) {
      config.command = Command::test;
      if (!sparsify_args.empty()) {
        config.sparsify_range = std::make_pair(sparsify_args[0], sparsify_args[1]);
      }
      return run_test(config);
    }
    config.command = Command::simulate;
    config.setting = parse_setting(setting_text);
    return run_simulate(config);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const sfda::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const sfda::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 3;
  }
}
