#include "fairneg/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "fairneg/common.hpp"

namespace fairneg {

void TrainConfig::validate() const {
  sampler.validate();
  if (epochs_max < 1) throw ConfigError("epochs_max must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (eval_k < 1) throw ConfigError("eval_k must be >= 1");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must be in [0, 1]");
  if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  if (simplex_floor <= 0.0) throw ConfigError("simplex_floor must be > 0");
  if (model.latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (model.lightgcn_layers < 0) throw ConfigError("lightgcn_layers must be >= 0");
}

double bpr_loss(const EmbeddingView& view, const std::vector<Triple>& triples) {
  if (triples.empty()) throw std::invalid_argument("bpr_loss over empty batch");
  double sum = 0.0;
  for (const Triple& t : triples) {
    sum -= log_sigmoid(view.score(t.user, t.pos) - view.score(t.user, t.neg));
  }
  return sum / static_cast<double>(triples.size());
}

GradNormStats GradNormStats::zeros(int groups) {
  GradNormStats s;
  s.pos_norm_sum = Eigen::VectorXd::Zero(groups);
  s.neg_norm_sum = Eigen::VectorXd::Zero(groups);
  s.pos_count = Eigen::VectorXi::Zero(groups);
  s.neg_count = Eigen::VectorXi::Zero(groups);
  return s;
}

Eigen::VectorXd GradNormStats::pos_mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(pos_norm_sum.size());
  for (Eigen::Index g = 0; g < m.size(); ++g) {
    if (pos_count[g] > 0) m[g] = pos_norm_sum[g] / pos_count[g];
  }
  return m;
}

Eigen::VectorXd GradNormStats::neg_mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(neg_norm_sum.size());
  for (Eigen::Index g = 0; g < m.size(); ++g) {
    if (neg_count[g] > 0) m[g] = neg_norm_sum[g] / neg_count[g];
  }
  return m;
}

EpochOutcome train_epoch(EmbeddingModel& model, AdamState& adam,
                         const InteractionTable& train, const GroupMap& groups,
                         const NegativeSampler& sampler, int batch_size,
                         Rng& shuffle_rng, Rng& sample_rng) {
  EpochOutcome out;
  out.norms = GradNormStats::zeros(groups.group_count());
  if (train.size() == 0) return out;

  const bool lightgcn = model.config.kind == BackboneKind::LightGCN;
  const double l2 = model.config.l2_reg;
  const int d = model.config.latent_dim;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng.shuffle(order);

  GradAccum accum;
  accum.init(model.num_users(), model.num_items(), d);
  Eigen::MatrixXd final_user_grad, final_item_grad;
  if (lightgcn) {
    final_user_grad = Eigen::MatrixXd::Zero(model.num_users(), d);
    final_item_grad = Eigen::MatrixXd::Zero(model.num_items(), d);
  }

  double loss_sum = 0.0;
  std::vector<Triple> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));

  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batch.clear();
    for (std::size_t k = start; k < end; ++k) {
      const Interaction& it = train.interactions()[order[k]];
      batch.push_back({it.user, it.item, 0});
    }
    // Negatives are drawn before any update in this batch, so the sampler
    // sees batch-start parameters.
    for (Triple& t : batch) t.neg = sampler.draw(t.user, sample_rng);

    Propagated prop;
    EmbeddingView loss_view = model.base_view();
    if (lightgcn) {
      prop = model.forward();
      loss_view = {&prop.users, &prop.items};
    }

    for (const Triple& t : batch) {
      const double diff =
          loss_view.score(t.user, t.pos) - loss_view.score(t.user, t.neg);
      loss_sum -= log_sigmoid(diff);
      const double c = sigmoid(-diff);

      const Eigen::RowVectorXd fu = loss_view.users->row(t.user);
      const double item_grad_norm = c * fu.norm();
      const std::int32_t gp = groups.item_group[static_cast<std::size_t>(t.pos)];
      const std::int32_t gn = groups.item_group[static_cast<std::size_t>(t.neg)];
      out.norms.pos_norm_sum[gp] += item_grad_norm;
      out.norms.pos_count[gp] += 1;
      out.norms.neg_norm_sum[gn] += item_grad_norm;
      out.norms.neg_count[gn] += 1;

      if (!lightgcn) {
        const Eigen::RowVectorXd ei = model.item_factors.row(t.pos);
        const Eigen::RowVectorXd ej = model.item_factors.row(t.neg);
        accum.add_user(t.user,
                       (-c * (ei - ej) + 2.0 * l2 * fu).eval());
        accum.add_item(t.pos, (-c * fu + 2.0 * l2 * ei).eval());
        accum.add_item(t.neg, (c * fu + 2.0 * l2 * ej).eval());
      } else {
        const Eigen::RowVectorXd fi = loss_view.items->row(t.pos);
        const Eigen::RowVectorXd fj = loss_view.items->row(t.neg);
        final_user_grad.row(t.user) += -c * (fi - fj);
        final_item_grad.row(t.pos) += -c * fu;
        final_item_grad.row(t.neg) += c * fu;
        accum.add_user(t.user,
                       (2.0 * l2 * model.user_factors.row(t.user)).eval());
        accum.add_item(t.pos,
                       (2.0 * l2 * model.item_factors.row(t.pos)).eval());
        accum.add_item(t.neg,
                       (2.0 * l2 * model.item_factors.row(t.neg)).eval());
      }
    }

    if (lightgcn) {
      Propagated base = model.propagate_back(final_user_grad, final_item_grad);
      accum.user_grad += base.users;
      accum.item_grad += base.items;
      accum.dense = true;
      final_user_grad.setZero();
      final_item_grad.setZero();
    }
    adam_step(adam, model, accum);
    accum.clear();
    out.triples += batch.size();
  }

  out.mean_bpr_loss = loss_sum / static_cast<double>(out.triples);
  return out;
}

TrainResult bilevel_train(const TrainConfig& config, const DataSplit& split,
                          const GroupMap& groups) {
  config.validate();
  const int a = groups.group_count();
  {
    std::vector<char> present(static_cast<std::size_t>(a), 0);
    for (const Interaction& it : split.train.interactions()) {
      present[static_cast<std::size_t>(
          groups.item_group[static_cast<std::size_t>(it.item)])] = 1;
    }
    for (int g = 0; g < a; ++g) {
      if (!present[static_cast<std::size_t>(g)]) {
        throw DataError("group " + std::to_string(g) + " (" +
                        groups.group_labels[static_cast<std::size_t>(g)] +
                        ") has no train positives");
      }
    }
  }

  Rng master(config.seed);
  EmbeddingModel model = EmbeddingModel::init_xavier(
      split.train.num_users(), split.train.num_items(), config.model,
      master.derive(1).seed());
  if (config.model.kind == BackboneKind::LightGCN) {
    model.build_adjacency(split.train);
  }
  AdamState adam = AdamState::zeros(model, config.adam);

  GroupDistribution p =
      fairstatic_distribution(split.train, groups, config.simplex_floor);
  MomentumBank bank = MomentumBank::zeros(a, config.gamma, config.alpha);
  const bool outer_updates =
      config.sampler.strategy == SamplerStrategy::FairNeg && config.dynamic;

  NegativeSampler sampler(config.sampler, split.train, groups);
  sampler.set_distribution(&p);

  TrainResult result;
  result.best_val_recall = -1.0;

  int epochs_since_best = 0;
  for (int epoch = 1; epoch <= config.epochs_max; ++epoch) {
    // Sampler score snapshot: live factors for MF, a per-epoch propagation
    // for LightGCN.
    Propagated epoch_prop;
    if (config.model.kind == BackboneKind::LightGCN) {
      epoch_prop = model.forward();
      sampler.set_view({&epoch_prop.users, &epoch_prop.items});
    } else {
      sampler.set_view(model.base_view());
    }

    Rng shuffle_rng = master.derive(2, static_cast<std::uint64_t>(epoch));
    Rng sample_rng = master.derive(3, static_cast<std::uint64_t>(epoch));
    const EpochOutcome outcome =
        train_epoch(model, adam, split.train, groups, sampler,
                    config.batch_size, shuffle_rng, sample_rng);

    Propagated eval_prop;
    EmbeddingView eval_view = model.base_view();
    if (config.model.kind == BackboneKind::LightGCN) {
      eval_prop = model.forward();
      eval_view = {&eval_prop.users, &eval_prop.items};
    }

    GbceOptions gbce = config.gbce;
    gbce.seed = master.derive(4, static_cast<std::uint64_t>(epoch)).seed();
    const GroupLossVector losses =
        gbce_losses(eval_view, split.train, groups, epoch, gbce);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.bpr_loss = outcome.mean_bpr_loss;
    rec.fairness.epoch = epoch;
    rec.fairness.gbce = losses.losses;
    rec.fairness.disp_loss = recall_disp_loss(losses);
    rec.fairness.p = p.p;  // the distribution the epoch actually sampled from
    rec.pos_grad_norm = outcome.norms.pos_mean();
    rec.neg_grad_norm = outcome.norms.neg_mean();
    rec.pos_count = outcome.norms.pos_count;
    rec.neg_count = outcome.norms.neg_count;

    if (outer_updates) {
      momentum_update(bank, p, group_gradients(losses));
    }
    rec.fairness.v = bank.v;

    const auto lists =
        topk_recommend(eval_view, split.validation, {&split.train}, config.eval_k);
    rec.val_recall = recall_at_k(lists, split.validation);
    result.log.push_back(std::move(rec));
    result.epochs_run = epoch;

    if (result.log.back().val_recall > result.best_val_recall) {
      result.best_val_recall = result.log.back().val_recall;
      result.best_epoch = epoch;
      result.best_model = model;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.patience) break;
    }
  }

  result.final_p = p;
  return result;
}

std::vector<NamedConfig> ablation_variants(const TrainConfig& base) {
  std::vector<NamedConfig> out;
  out.push_back({"fairneg", base});

  TrainConfig no_dynamic = base;
  no_dynamic.dynamic = false;
  out.push_back({"fairneg-dynamic", no_dynamic});

  TrainConfig no_imp = base;
  no_imp.sampler.beta = 1.0;
  out.push_back({"fairneg-imp", no_imp});

  TrainConfig no_momentum = base;
  no_momentum.gamma = 0.0;
  out.push_back({"fairneg-momentum", no_momentum});

  TrainConfig uns = base;
  uns.sampler.strategy = SamplerStrategy::UNS;
  out.push_back({"uns", uns});
  return out;
}

std::string EpochRecord::csv_header(int groups) {
  std::ostringstream out;
  out << "epoch,bpr_loss,val_recall,disp_loss";
  auto block = [&](const char* name) {
    for (int g = 0; g < groups; ++g) out << ',' << name << '_' << g;
  };
  block("gbce");
  block("p");
  block("v");
  block("pos_grad_norm");
  block("neg_grad_norm");
  block("pos_count");
  block("neg_count");
  return out.str();
}

std::string EpochRecord::csv_row() const {
  std::ostringstream out;
  out << epoch << ',' << format_double(bpr_loss) << ','
      << format_double(val_recall) << ',' << format_double(fairness.disp_loss);
  auto vec = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index g = 0; g < v.size(); ++g) out << ',' << format_double(v[g]);
  };
  vec(fairness.gbce);
  vec(fairness.p);
  vec(fairness.v);
  vec(pos_grad_norm);
  vec(neg_grad_norm);
  for (Eigen::Index g = 0; g < pos_count.size(); ++g) out << ',' << pos_count[g];
  for (Eigen::Index g = 0; g < neg_count.size(); ++g) out << ',' << neg_count[g];
  return out.str();
}

}  // namespace fairneg
