#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fairneg/fairness.hpp"
#include "fairneg/interactions.hpp"
#include "fairneg/metrics.hpp"
#include "fairneg/model.hpp"
#include "fairneg/samplers.hpp"

namespace fairneg {

struct Triple {
  std::int32_t user = 0;
  std::int32_t pos = 0;
  std::int32_t neg = 0;
};

struct TrainConfig {
  ModelConfig model;
  AdamConfig adam;
  SamplerConfig sampler;
  int epochs_max = 100;
  int batch_size = 1024;
  int patience = 10;
  int eval_k = 20;
  std::uint64_t seed = 42;
  // Outer optimizer; `dynamic` off freezes p at its FairStatic init.
  bool dynamic = true;
  double gamma = 0.1;
  double alpha = 0.1;
  double simplex_floor = 1e-3;
  GbceOptions gbce;
  GroupRecallAggregation aggregation = GroupRecallAggregation::Micro;

  void validate() const;
};

// Mean of -ln sigma(y_ui - y_uj) over the batch (regularization excluded).
double bpr_loss(const EmbeddingView& view, const std::vector<Triple>& triples);

// Per-group mean L2 norm of the loss gradient on the item embedding, split
// by the item's role in the triple.
struct GradNormStats {
  Eigen::VectorXd pos_norm_sum, neg_norm_sum;
  Eigen::VectorXi pos_count, neg_count;

  static GradNormStats zeros(int groups);
  Eigen::VectorXd pos_mean() const;
  Eigen::VectorXd neg_mean() const;
};

struct EpochOutcome {
  double mean_bpr_loss = 0.0;
  std::size_t triples = 0;
  GradNormStats norms;
};

// One pass over all train positives in seeded shuffled order; one sampled
// negative per positive; Adam applied per mini-batch on summed gradients.
EpochOutcome train_epoch(EmbeddingModel& model, AdamState& adam,
                         const InteractionTable& train, const GroupMap& groups,
                         const NegativeSampler& sampler, int batch_size,
                         Rng& shuffle_rng, Rng& sample_rng);

struct EpochRecord {
  int epoch = 0;
  double bpr_loss = 0.0;
  double val_recall = 0.0;
  FairnessLogRecord fairness;
  Eigen::VectorXd pos_grad_norm, neg_grad_norm;
  Eigen::VectorXi pos_count, neg_count;

  static std::string csv_header(int groups);
  std::string csv_row() const;
};

struct TrainResult {
  EmbeddingModel best_model;
  int best_epoch = 0;
  double best_val_recall = 0.0;
  int epochs_run = 0;
  std::vector<EpochRecord> log;
  GroupDistribution final_p;
};

// Algorithm: p starts at the FairStatic distribution; each epoch runs the
// inner BPR pass, computes per-group G-BCE, and (for dynamic FairNeg) moves
// p by the momentum rule; stops early when validation Recall@eval_k hasn't
// improved for `patience` consecutive epochs. Baseline strategies keep p
// frozen; their G-BCE is still logged as a diagnostic.
TrainResult bilevel_train(const TrainConfig& config, const DataSplit& split,
                          const GroupMap& groups);

struct NamedConfig {
  std::string name;
  TrainConfig config;
};

// Base FairNeg plus -dynamic / -imp / -momentum variants and the UNS
// baseline: five runnable configs.
std::vector<NamedConfig> ablation_variants(const TrainConfig& base);

}  // namespace fairneg
