#include "sfda/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "sfda/errors.hpp"

namespace sfda {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  try {
    std::size_t used = 0;
    out = std::stod(text, &used);
    return used == text.size();
  } catch (const std::exception&) {
    return false;
  }
}

double round_significant(double value, int digits) {
  if (value == 0.0 || !std::isfinite(value)) return value;
  const double magnitude =
      std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(value)))));
  return std::round(value * magnitude) / magnitude;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json array = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    array.push_back(round_significant(v[i], 10));
  }
  return array;
}

struct RawRow {
  int group;
  std::string subject;
  double t;
  double y;
};

} // namespace

std::pair<GroupSample, GroupSample> parse_csv(const std::string& path,
                                              bool rescale_time,
                                              int* dropped_rows) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("parse_csv: cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("parse_csv: '" + path + "' is empty");
  }
  const std::vector<std::string> header = split_csv_line(line);
  const std::vector<std::string> expected = {"group", "subject", "t", "y"};
  for (const std::string& column : expected) {
    if (std::find(header.begin(), header.end(), column) == header.end()) {
      throw ValidationError("parse_csv: missing column '" + column + "' in '" +
                            path + "'");
    }
  }
  std::vector<int> position(4, -1);
  for (std::size_t i = 0; i < header.size(); ++i) {
    for (std::size_t j = 0; j < expected.size(); ++j) {
      if (header[i] == expected[j]) position[j] = static_cast<int>(i);
    }
  }

  std::vector<RawRow> rows;
  int dropped = 0;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() < header.size()) {
      throw ValidationError("parse_csv: line " + std::to_string(line_number) +
                            ": expected " + std::to_string(header.size()) +
                            " fields");
    }
    RawRow row;
    const std::string& group_text = fields[static_cast<std::size_t>(position[0])];
    if (group_text == "1") {
      row.group = 1;
    } else if (group_text == "2") {
      row.group = 2;
    } else {
      throw ValidationError("parse_csv: line " + std::to_string(line_number) +
                            ": unknown group label '" + group_text + "'");
    }
    row.subject = fields[static_cast<std::size_t>(position[1])];
    if (!parse_double(fields[static_cast<std::size_t>(position[2])], row.t)) {
      throw ValidationError("parse_csv: line " + std::to_string(line_number) +
                            ": cannot parse t");
    }
    if (!parse_double(fields[static_cast<std::size_t>(position[3])], row.y) ||
        !std::isfinite(row.y)) {
      ++dropped;  // missing or non-finite response
      continue;
    }
    if (!rescale_time && !(row.t >= 0.0 && row.t <= 1.0)) {
      throw ValidationError("parse_csv: line " + std::to_string(line_number) +
                            ": t outside [0,1]; pass --rescale-time to remap");
    }
    rows.push_back(std::move(row));
  }
  if (dropped_rows != nullptr) *dropped_rows = dropped;

  if (rescale_time && !rows.empty()) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const RawRow& row : rows) {
      lo = std::min(lo, row.t);
      hi = std::max(hi, row.t);
    }
    if (!(hi > lo)) {
      throw ValidationError("parse_csv: cannot rescale a single time value");
    }
    for (RawRow& row : rows) row.t = (row.t - lo) / (hi - lo);
  }

  std::vector<Observation> group1, group2;
  for (const RawRow& row : rows) {
    Observation obs{row.group, row.subject, row.t, row.y};
    (row.group == 1 ? group1 : group2).push_back(std::move(obs));
  }
  if (group1.empty() || group2.empty()) {
    throw ValidationError("parse_csv: both groups must contain observations");
  }
  return {GroupSample::from_observations(group1),
          GroupSample::from_observations(group2)};
}

void write_samples_csv(const GroupSample& sample1, const GroupSample& sample2,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ValidationError("write_samples_csv: cannot open '" + path + "'");
  }
  out << "group,subject,t,y\n";
  out.precision(17);
  const auto write_group = [&](const GroupSample& sample, int group) {
    for (Eigen::Index a = 0; a < sample.size(); ++a) {
      const int s = sample.subject_of()[static_cast<std::size_t>(a)];
      out << group << ',' << sample.labels()[static_cast<std::size_t>(s)] << ','
          << sample.times()[a] << ',' << sample.values()[a] << '\n';
    }
  };
  write_group(sample1, 1);
  write_group(sample2, 2);
}

GroupSample sparsify(const GroupSample& sample, int n_min, int n_max,
                     RngStream& stream) {
  if (n_min < 1 || n_max < n_min) {
    throw ValidationError("sparsify: need 1 <= n_min <= n_max");
  }
  const std::vector<int> counts = sample.counts();
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (counts[s] < n_min) {
      throw ValidationError("sparsify: subject '" + sample.labels()[s] +
                            "' has fewer than n_min observations");
    }
  }
  // Observation indices per subject, in input order.
  std::vector<std::vector<int>> per_subject(counts.size());
  for (Eigen::Index a = 0; a < sample.size(); ++a) {
    per_subject[static_cast<std::size_t>(
                    sample.subject_of()[static_cast<std::size_t>(a)])]
        .push_back(static_cast<int>(a));
  }
  std::vector<char> keep(static_cast<std::size_t>(sample.size()), 0);
  for (auto& indices : per_subject) {
    const int n_i = static_cast<int>(indices.size());
    const int k = stream.uniform_int(n_min, std::min(n_max, n_i));
    for (int i = 0; i < k; ++i) {
      const int j = stream.uniform_int(i, n_i - 1);
      std::swap(indices[static_cast<std::size_t>(i)],
                indices[static_cast<std::size_t>(j)]);
    }
    for (int i = 0; i < k; ++i) keep[static_cast<std::size_t>(indices[i])] = 1;
  }
  std::vector<double> times, values;
  std::vector<int> subject;
  for (Eigen::Index a = 0; a < sample.size(); ++a) {
    if (!keep[static_cast<std::size_t>(a)]) continue;
    times.push_back(sample.times()[a]);
    values.push_back(sample.values()[a]);
    subject.push_back(sample.subject_of()[static_cast<std::size_t>(a)]);
  }
  // Subjects always retain at least one observation (k >= n_min >= 1).
  return GroupSample::from_arrays(
      Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size())),
      Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())),
      std::move(subject), sample.labels());
}

std::string report_csv_path(const std::string& json_path) {
  const auto slash = json_path.find_last_of('/');
  const auto dot = json_path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return json_path + ".csv";
  }
  return json_path.substr(0, dot) + ".csv";
}

void emit_report(const TestReport& report, const std::string& path) {
  nlohmann::json doc;
  doc["schema_version"] = "1";
  doc["grid"] = vector_to_json(report.grid.points);
  doc["diff_estimate"] = vector_to_json(report.diff_estimate);
  doc["band_lower"] = vector_to_json(report.band_lower);
  doc["band_upper"] = vector_to_json(report.band_upper);
  doc["kappa_sq"] = round_significant(report.kappa_sq, 10);
  doc["critical_value"] = round_significant(report.critical_value, 10);
  doc["p_value"] = round_significant(report.p_value, 10);
  doc["reject"] = report.reject;
  doc["alpha"] = round_significant(report.alpha, 10);
  doc["lambda1"] = round_significant(report.lambda1, 10);
  doc["lambda2"] = round_significant(report.lambda2, 10);
  doc["B"] = report.B;
  doc["seed"] = report.seed;

  std::ofstream json_out(path);
  if (!json_out) {
    throw ValidationError("emit_report: cannot open '" + path + "'");
  }
  json_out << doc.dump(2) << '\n';
  if (!json_out) {
    throw ValidationError("emit_report: failed writing '" + path + "'");
  }

  const std::string csv_path = report_csv_path(path);
  std::ofstream csv_out(csv_path);
  if (!csv_out) {
    throw ValidationError("emit_report: cannot open '" + csv_path + "'");
  }
  csv_out << "t,diff,lower,upper\n";
  csv_out.precision(10);
  for (Eigen::Index g = 0; g < report.grid.points.size(); ++g) {
    csv_out << report.grid.points[g] << ',' << report.diff_estimate[g] << ','
            << report.band_lower[g] << ',' << report.band_upper[g] << '\n';
  }
}

void write_mc_summary_csv(const SimConfig& config, const MCSummary& summary,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ValidationError("write_mc_summary_csv: cannot open '" + path + "'");
  }
  out << "setting,n1,n2,N_max,delta,imse_mean,imse_sd,rejection_rate,runs,failures\n";
  out.precision(10);
  out << setting_name(config.setting) << ',' << config.n1 << ',' << config.n2
      << ',' << config.n_max << ',' << config.delta << ',' << summary.imse_mean
      << ',' << summary.imse_sd << ',' << summary.rejection_rate << ','
      << summary.runs << ',' << summary.failures << '\n';
}

void write_coverage_csv(const MCSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ValidationError("write_coverage_csv: cannot open '" + path + "'");
  }
  out << "t,coverage\n";
  out.precision(10);
  for (Eigen::Index i = 0; i < summary.coverage_grid.size(); ++i) {
    out << summary.coverage_grid[i] << ',' << summary.coverage[i] << '\n';
  }
}

std::string setting_name(Setting setting) {
  switch (setting) {
    case Setting::c1: return "c1";
    case Setting::c2: return "c2";
    case Setting::c3: return "c3";
  }
  return "c1";
}

Setting parse_setting(const std::string& name) {
  if (name == "c1" || name == "c.1") return Setting::c1;
  if (name == "c2" || name == "c.2") return Setting::c2;
  if (name == "c3" || name == "c.3") return Setting::c3;
  throw ValidationError("unknown setting '" + name + "' (expected c1, c2 or c3)");
}

} // namespace sfda
