#include "fairneg/fairness.hpp"

#include <numeric>
#include <vector>

#include "fairneg/common.hpp"
#include "fairneg/rng.hpp"

namespace fairneg {

GroupLossVector gbce_losses(const EmbeddingView& view,
                            const InteractionTable& train,
                            const GroupMap& groups, int epoch,
                            const GbceOptions& options) {
  const int a = groups.group_count();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(a);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(a);

  auto add = [&](const Interaction& it) {
    const std::int32_t g =
        groups.item_group[static_cast<std::size_t>(it.item)];
    sum[g] -= log_sigmoid(view.score(it.user, it.item));
    count[g] += 1.0;
  };

  const auto& all = train.interactions();
  if (all.size() <= options.full_limit || options.subsample >= all.size()) {
    for (const Interaction& it : all) add(it);
  } else {
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(options.seed);
    for (std::size_t k = 0; k < options.subsample; ++k) {
      const std::size_t j = k + rng.uniform_index(order.size() - k);
      std::swap(order[k], order[j]);
      add(all[order[k]]);
    }
    // A group the subsample missed is evaluated exactly instead.
    for (int g = 0; g < a; ++g) {
      if (count[g] > 0.0) continue;
      for (const Interaction& it : all) {
        if (groups.item_group[static_cast<std::size_t>(it.item)] == g) add(it);
      }
    }
  }

  GroupLossVector out;
  out.epoch = epoch;
  out.losses.resize(a);
  for (int g = 0; g < a; ++g) {
    if (count[g] == 0.0) {
      throw DataError("group " + std::to_string(g) +
                      " has no train positives; G-BCE undefined");
    }
    out.losses[g] = sum[g] / count[g];
  }
  return out;
}

Eigen::VectorXd group_gradients(const GroupLossVector& losses) {
  const double mean = losses.losses.mean();
  return losses.losses.array() - mean;
}

void momentum_update(MomentumBank& bank, GroupDistribution& p,
                     const Eigen::VectorXd& grads) {
  if (!grads.allFinite()) {
    throw std::invalid_argument("non-finite group gradients");
  }
  bank.v = bank.gamma * bank.v + bank.alpha * grads;
  const Eigen::VectorXd raw = p.p - bank.v;
  p = project_simplex(raw, p.floor_eps);
}

double recall_disp_loss(const GroupLossVector& losses) {
  const double mean = losses.losses.mean();
  return (losses.losses.array() - mean).abs().sum();
}

}  // namespace fairneg
