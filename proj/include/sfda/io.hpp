#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "sfda/data.hpp"
#include "sfda/inference.hpp"
#include "sfda/rng.hpp"
#include "sfda/simulation.hpp"

namespace sfda {

enum class Command { fit, test, simulate };

/// Parsed command line; validated before dispatch.
struct RunConfig {
  Command command = Command::test;
  std::string input_path;
  std::string output_path;
  int group = 1;                       // fit only
  std::optional<double> lambda;        // fit only; GCV when absent
  int m = 2;
  double alpha = 0.05;
  int B = 300;
  int grid_size = 101;
  double lambda_min = 1e-6;
  double lambda_max = 1e2;
  int lambda_count = 40;
  std::uint64_t seed = 0;
  bool rescale_time = false;
  bool paper_literal_weights = false;
  std::optional<std::pair<int, int>> sparsify_range;
  // simulate only
  Setting setting = Setting::c1;
  int n1 = 200;
  int n2 = 100;
  int n_max = 10;
  double delta = 0.0;
  int runs = 300;
};

/// Reads long-format CSV with header `group,subject,t,y`. Rows whose y is
/// empty or non-finite are dropped (missing responses); the count of dropped
/// rows is returned through dropped_rows when given. Without rescaling,
/// every t must already lie in [0,1]; with rescaling the observed range is
/// mapped affinely onto [0,1] across both groups.
std::pair<GroupSample, GroupSample> parse_csv(const std::string& path,
                                              bool rescale_time = false,
                                              int* dropped_rows = nullptr);

/// Writes both groups back to the long CSV format.
void write_samples_csv(const GroupSample& sample1, const GroupSample& sample2,
                       const std::string& path);

/// Keeps, for every subject, a uniformly random subset of k observations
/// with k ~ uniform{n_min, ..., min(n_max, N_i)}, preserving input order.
GroupSample sparsify(const GroupSample& sample, int n_min, int n_max,
                     RngStream& stream);

/// Serializes the report as JSON (10 significant digits, schema version "1")
/// plus a sibling CSV `t,diff,lower,upper` for plotting.
void emit_report(const TestReport& report, const std::string& path);

/// Path of the CSV written next to a report JSON.
std::string report_csv_path(const std::string& json_path);

/// Monte Carlo summary row and coverage curve as CSV.
void write_mc_summary_csv(const SimConfig& config, const MCSummary& summary,
                          const std::string& path);
void write_coverage_csv(const MCSummary& summary, const std::string& path);

std::string setting_name(Setting setting);
Setting parse_setting(const std::string& name);

} // namespace sfda
