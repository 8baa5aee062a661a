#include "sfda/data.hpp"

#include <cmath>
#include <unordered_map>

#include "sfda/errors.hpp"

namespace sfda {

GroupSample GroupSample::from_observations(const std::vector<Observation>& rows) {
  if (rows.empty()) {
    throw ValidationError("GroupSample: no observations");
  }
  GroupSample sample;
  const int group = rows.front().group;
  std::unordered_map<std::string, int> index;
  sample.times_.resize(static_cast<Eigen::Index>(rows.size()));
  sample.values_.resize(static_cast<Eigen::Index>(rows.size()));
  sample.subject_.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Observation& row = rows[i];
    if (row.group != group) {
      throw ValidationError("GroupSample: mixed group labels in one sample");
    }
    auto [it, inserted] = index.try_emplace(row.subject,
                                            static_cast<int>(sample.labels_.size()));
    if (inserted) sample.labels_.push_back(row.subject);
    sample.subject_.push_back(it->second);
    sample.times_[static_cast<Eigen::Index>(i)] = row.t;
    sample.values_[static_cast<Eigen::Index>(i)] = row.y;
  }
  sample.validate();
  return sample;
}

GroupSample GroupSample::from_arrays(Eigen::VectorXd times, Eigen::VectorXd values,
                                     std::vector<int> subject,
                                     std::vector<std::string> labels) {
  GroupSample sample;
  sample.times_ = std::move(times);
  sample.values_ = std::move(values);
  sample.subject_ = std::move(subject);
  sample.labels_ = std::move(labels);
  if (sample.times_.size() != sample.values_.size() ||
      static_cast<std::size_t>(sample.times_.size()) != sample.subject_.size()) {
    throw ValidationError("GroupSample: array lengths disagree");
  }
  sample.validate();
  return sample;
}

void GroupSample::validate() const {
  if (times_.size() == 0) {
    throw ValidationError("GroupSample: empty sample");
  }
  std::vector<int> seen(labels_.size(), 0);
  for (Eigen::Index i = 0; i < times_.size(); ++i) {
    if (!(times_[i] >= 0.0 && times_[i] <= 1.0)) {
      throw ValidationError("GroupSample: observation time outside [0,1]");
    }
    if (!std::isfinite(values_[i])) {
      throw ValidationError("GroupSample: non-finite response value");
    }
    const int s = subject_[static_cast<std::size_t>(i)];
    if (s < 0 || s >= static_cast<int>(labels_.size())) {
      throw ValidationError("GroupSample: subject index out of range");
    }
    ++seen[static_cast<std::size_t>(s)];
  }
  for (std::size_t s = 0; s < seen.size(); ++s) {
    if (seen[s] == 0) {
      throw ValidationError("GroupSample: subject '" + labels_[s] +
                            "' has no observations");
    }
  }
}

std::vector<int> GroupSample::counts() const {
  std::vector<int> n_i(labels_.size(), 0);
  for (int s : subject_) ++n_i[static_cast<std::size_t>(s)];
  return n_i;
}

} // namespace sfda
