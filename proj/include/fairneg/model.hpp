#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <string>
#include <vector>

#include "fairneg/interactions.hpp"

namespace fairneg {

enum class BackboneKind { MF, LightGCN };

std::string backbone_name(BackboneKind kind);
BackboneKind backbone_from_name(const std::string& name);

struct ModelConfig {
  BackboneKind kind = BackboneKind::MF;
  int latent_dim = 64;
  double l2_reg = 0.01;
  int lightgcn_layers = 3;
};

// Propagated user/item embeddings (LightGCN output; for MF the base factors
// play this role directly).
struct Propagated {
  Eigen::MatrixXd users;
  Eigen::MatrixXd items;
};

// Read-only scoring surface over whichever embeddings are current.
struct EmbeddingView {
  const Eigen::MatrixXd* users = nullptr;
  const Eigen::MatrixXd* items = nullptr;

  double score(std::int32_t user, std::int32_t item) const {
    return users->row(user).dot(items->row(item));
  }
  // Scores of every item in the catalog for one user.
  Eigen::VectorXd score_all(std::int32_t user) const {
    return (*items) * users->row(user).transpose();
  }
};

// User/item latent factors plus, for LightGCN, the symmetric-normalized
// bipartite train adjacency. Factors are plain members: the optimizer
// updates them in place.
class EmbeddingModel {
 public:
  // Entries uniform in [-b, b], b = sqrt(6 / (2 d)); deterministic per seed.
  static EmbeddingModel init_xavier(std::int32_t num_users,
                                    std::int32_t num_items,
                                    const ModelConfig& config,
                                    std::uint64_t seed);

  ModelConfig config;
  std::uint64_t init_seed = 0;
  Eigen::MatrixXd user_factors;  // num_users x d
  Eigen::MatrixXd item_factors;  // num_items x d

  std::int32_t num_users() const {
    return static_cast<std::int32_t>(user_factors.rows());
  }
  std::int32_t num_items() const {
    return static_cast<std::int32_t>(item_factors.rows());
  }

  // Builds the normalized adjacency from train interactions only.
  void build_adjacency(const InteractionTable& train);
  bool has_adjacency() const { return adjacency_built_; }

  // e^(l+1) = A_hat e^(l), final = mean over layers 0..L. Isolated nodes
  // propagate nothing and end up at e^(0) / (L + 1).
  Propagated forward() const;

  // Base factors as a view (the MF scoring surface).
  EmbeddingView base_view() const { return {&user_factors, &item_factors}; }

  // Adjoint of forward(); the propagation operator is symmetric, so this is
  // the same mean-of-powers applied to gradient matrices.
  Propagated propagate_back(const Eigen::MatrixXd& user_grad,
                            const Eigen::MatrixXd& item_grad) const;

 private:
  Eigen::SparseMatrix<double> adj_;    // num_users x num_items, normalized
  Eigen::SparseMatrix<double> adj_t_;  // transpose, kept for fast products
  bool adjacency_built_ = false;
};

// Model score for one pair; LightGCN runs a full forward pass, so inside
// loops prefer an EmbeddingView over a snapshot.
double score(const EmbeddingModel& model, std::int32_t user, std::int32_t item);

// Sparse gradient accumulator shaped like the factor tables. `dense`
// signals that every row carries gradient (LightGCN backprop output).
struct GradAccum {
  Eigen::MatrixXd user_grad;
  Eigen::MatrixXd item_grad;
  std::vector<std::int32_t> touched_users;
  std::vector<std::int32_t> touched_items;
  bool dense = false;

  void init(std::int32_t num_users, std::int32_t num_items, int d);
  void clear();
  void add_user(std::int32_t user, const Eigen::RowVectorXd& g);
  void add_item(std::int32_t item, const Eigen::RowVectorXd& g);

 private:
  std::vector<char> user_hit_;
  std::vector<char> item_hit_;
};

// d(-ln sigma(y_ui - y_uj)) coefficient: c = sigma(y_uj - y_ui).
double bpr_sigma_coeff(const EmbeddingView& view, std::int32_t user,
                       std::int32_t i, std::int32_t j);

// Gradients of -ln sigma(y_ui - y_uj) + l2 (|e_u|^2 + |e_i|^2 + |e_j|^2)
// w.r.t. the base factors. MF touches three rows; LightGCN chains through
// the propagation and is dense. Standalone form used by tests and small
// callers; the trainer accumulates batches with the same building blocks.
GradAccum bpr_triple_gradients(const EmbeddingModel& model, std::int32_t user,
                               std::int32_t i, std::int32_t j);

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  Eigen::MatrixXd m_user, v_user;
  Eigen::MatrixXd m_item, v_item;
  std::int64_t step = 0;

  static AdamState zeros(const EmbeddingModel& model, const AdamConfig& config);
};

// Bias-corrected Adam applied to the rows present in `grads` (all rows when
// dense). Throws on non-finite gradients.
void adam_step(AdamState& state, EmbeddingModel& model, const GradAccum& grads);

// JSON checkpoint: header plus row-major factor matrices; doubles are
// written in shortest round-trip form so save/load is bit-exact.
void save_checkpoint(const EmbeddingModel& model, const std::string& path);
EmbeddingModel load_checkpoint(const std::string& path);

}  // namespace fairneg
