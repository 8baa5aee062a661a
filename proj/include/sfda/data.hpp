#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sfda {

/// One longitudinal record in long format.
struct Observation {
  int group = 1;        // 1 or 2
  std::string subject;  // free-form identifier, unique within a group
  double t = 0.0;       // observation time in [0,1]
  double y = 0.0;       // noisy response
};

/// All observations of one group, with subjects remapped to contiguous
/// indices 0..n-1 in first-appearance order. Immutable after construction
/// and safe to share across threads.
class GroupSample {
public:
  /// Builds from long-format rows (all rows must carry the same group label).
  static GroupSample from_observations(const std::vector<Observation>& rows);

  /// Builds from parallel arrays with subject ids already contiguous.
  static GroupSample from_arrays(Eigen::VectorXd times, Eigen::VectorXd values,
                                 std::vector<int> subject,
                                 std::vector<std::string> labels);

  Eigen::Index size() const { return times_.size(); }      // M
  int subjects() const { return static_cast<int>(labels_.size()); }  // n

  const Eigen::VectorXd& times() const { return times_; }
  const Eigen::VectorXd& values() const { return values_; }
  const std::vector<int>& subject_of() const { return subject_; }
  const std::vector<std::string>& labels() const { return labels_; }

  /// Number of observations per subject.
  std::vector<int> counts() const;

private:
  GroupSample() = default;
  void validate() const;

  Eigen::VectorXd times_;
  Eigen::VectorXd values_;
  std::vector<int> subject_;
  std::vector<std::string> labels_;
};

} // namespace sfda
