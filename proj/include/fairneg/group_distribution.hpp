#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace fairneg {

// Group-level negative-sampling simplex. Entries stay >= floor_eps so every
// group remains sampleable.
struct GroupDistribution {
  Eigen::VectorXd p;
  double floor_eps = 1e-3;

  int groups() const { return static_cast<int>(p.size()); }

  void validate() const {
    if (p.size() == 0) throw std::logic_error("empty group distribution");
    if ((p.array() < floor_eps - 1e-15).any()) {
      throw std::logic_error("group distribution entry below floor");
    }
    if (std::abs(p.sum() - 1.0) > 1e-12) {
      throw std::logic_error("group distribution does not sum to 1");
    }
  }
};

// Maps an arbitrary finite vector back onto the simplex while keeping every
// entry at or above the floor: entries below eps are pinned at eps and the
// remaining mass is spread proportionally over the rest, iterating in case
// the rescale pushes further entries under the floor. All-low input becomes
// uniform.
GroupDistribution project_simplex(const Eigen::VectorXd& raw, double eps = 1e-3);

}  // namespace fairneg
