#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "fairneg/group_distribution.hpp"
#include "fairneg/interactions.hpp"
#include "fairneg/model.hpp"

namespace fairneg {

// Per-group G-BCE losses at one training step (epoch).
struct GroupLossVector {
  Eigen::VectorXd losses;
  int epoch = 0;
};

// One momentum vector per group: v <- gamma v + alpha grad.
struct MomentumBank {
  Eigen::VectorXd v;
  double gamma = 0.1;
  double alpha = 0.1;

  static MomentumBank zeros(int groups, double gamma, double alpha) {
    return {Eigen::VectorXd::Zero(groups), gamma, alpha};
  }
};

struct GbceOptions {
  // Above this many train positives, losses are estimated on a seeded
  // uniform subsample; groups that miss the subsample fall back to exact.
  std::size_t full_limit = 500000;
  std::size_t subsample = 200000;
  std::uint64_t seed = 0;
};

// L_a = -(1/|Y+_a|) sum over group-a train positives of ln(sigma(score)).
// Every group must have at least one train positive.
GroupLossVector gbce_losses(const EmbeddingView& view,
                            const InteractionTable& train,
                            const GroupMap& groups, int epoch,
                            const GbceOptions& options = {});

// Deviation of each group's loss from the mean; sums to zero.
Eigen::VectorXd group_gradients(const GroupLossVector& losses);

// v <- gamma v + alpha grad; p <- project(p - v). Updates both in place.
void momentum_update(MomentumBank& bank, GroupDistribution& p,
                     const Eigen::VectorXd& grads);

// Outer objective: sum of absolute deviations from the mean G-BCE loss.
double recall_disp_loss(const GroupLossVector& losses);

// One per-epoch fairness log record.
struct FairnessLogRecord {
  int epoch = 0;
  Eigen::VectorXd gbce;
  double disp_loss = 0.0;
  Eigen::VectorXd p;
  Eigen::VectorXd v;
};

}  // namespace fairneg
