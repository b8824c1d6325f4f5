#include "fairneg/model.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "fairneg/common.hpp"
#include "fairneg/rng.hpp"

namespace fairneg {

using json = nlohmann::json;

std::string backbone_name(BackboneKind kind) {
  return kind == BackboneKind::MF ? "mf" : "lightgcn";
}

BackboneKind backbone_from_name(const std::string& name) {
  if (name == "mf") return BackboneKind::MF;
  if (name == "lightgcn") return BackboneKind::LightGCN;
  throw ConfigError("unknown backbone: \"" + name + "\"");
}

EmbeddingModel EmbeddingModel::init_xavier(std::int32_t num_users,
                                           std::int32_t num_items,
                                           const ModelConfig& config,
                                           std::uint64_t seed) {
  if (config.latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  EmbeddingModel m;
  m.config = config;
  m.init_seed = seed;
  const int d = config.latent_dim;
  const double bound = std::sqrt(6.0 / (2.0 * d));
  Rng rng(seed);
  m.user_factors.resize(num_users, d);
  m.item_factors.resize(num_items, d);
  for (std::int32_t u = 0; u < num_users; ++u) {
    for (int k = 0; k < d; ++k) m.user_factors(u, k) = rng.uniform(-bound, bound);
  }
  for (std::int32_t i = 0; i < num_items; ++i) {
    for (int k = 0; k < d; ++k) m.item_factors(i, k) = rng.uniform(-bound, bound);
  }
  return m;
}

void EmbeddingModel::build_adjacency(const InteractionTable& train) {
  const std::int32_t nu = num_users();
  const std::int32_t ni = num_items();
  std::vector<double> user_deg(static_cast<std::size_t>(nu), 0.0);
  std::vector<double> item_deg(static_cast<std::size_t>(ni), 0.0);
  for (const Interaction& it : train.interactions()) {
    user_deg[static_cast<std::size_t>(it.user)] += 1.0;
    item_deg[static_cast<std::size_t>(it.item)] += 1.0;
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(train.size());
  for (const Interaction& it : train.interactions()) {
    const double w = 1.0 / std::sqrt(user_deg[static_cast<std::size_t>(it.user)] *
                                     item_deg[static_cast<std::size_t>(it.item)]);
    triplets.emplace_back(it.user, it.item, w);
  }
  adj_.resize(nu, ni);
  adj_.setFromTriplets(triplets.begin(), triplets.end());
  adj_.makeCompressed();
  adj_t_ = adj_.transpose();
  adj_t_.makeCompressed();
  adjacency_built_ = true;
}

Propagated EmbeddingModel::forward() const {
  if (config.kind == BackboneKind::MF) {
    return {user_factors, item_factors};
  }
  if (!adjacency_built_) {
    throw std::runtime_error("LightGCN forward without a built adjacency");
  }
  Eigen::MatrixXd acc_u = user_factors;
  Eigen::MatrixXd acc_i = item_factors;
  Eigen::MatrixXd cur_u = user_factors;
  Eigen::MatrixXd cur_i = item_factors;
  for (int l = 0; l < config.lightgcn_layers; ++l) {
    Eigen::MatrixXd next_u = adj_ * cur_i;
    Eigen::MatrixXd next_i = adj_t_ * cur_u;
    acc_u += next_u;
    acc_i += next_i;
    cur_u = std::move(next_u);
    cur_i = std::move(next_i);
  }
  const double inv = 1.0 / (config.lightgcn_layers + 1);
  return {acc_u * inv, acc_i * inv};
}

Propagated EmbeddingModel::propagate_back(const Eigen::MatrixXd& user_grad,
                                          const Eigen::MatrixXd& item_grad) const {
  if (config.kind == BackboneKind::MF) {
    return {user_grad, item_grad};
  }
  if (!adjacency_built_) {
    throw std::runtime_error("LightGCN backprop without a built adjacency");
  }
  Eigen::MatrixXd acc_u = user_grad;
  Eigen::MatrixXd acc_i = item_grad;
  Eigen::MatrixXd cur_u = user_grad;
  Eigen::MatrixXd cur_i = item_grad;
  for (int l = 0; l < config.lightgcn_layers; ++l) {
    Eigen::MatrixXd next_u = adj_ * cur_i;
    Eigen::MatrixXd next_i = adj_t_ * cur_u;
    acc_u += next_u;
    acc_i += next_i;
    cur_u = std::move(next_u);
    cur_i = std::move(next_i);
  }
  const double inv = 1.0 / (config.lightgcn_layers + 1);
  return {acc_u * inv, acc_i * inv};
}

double score(const EmbeddingModel& model, std::int32_t user, std::int32_t item) {
  if (model.config.kind == BackboneKind::MF) {
    return model.base_view().score(user, item);
  }
  Propagated prop = model.forward();
  return prop.users.row(user).dot(prop.items.row(item));
}

void GradAccum::init(std::int32_t num_users, std::int32_t num_items, int d) {
  user_grad = Eigen::MatrixXd::Zero(num_users, d);
  item_grad = Eigen::MatrixXd::Zero(num_items, d);
  user_hit_.assign(static_cast<std::size_t>(num_users), 0);
  item_hit_.assign(static_cast<std::size_t>(num_items), 0);
  touched_users.clear();
  touched_items.clear();
  dense = false;
}

void GradAccum::clear() {
  for (std::int32_t u : touched_users) user_grad.row(u).setZero();
  for (std::int32_t i : touched_items) item_grad.row(i).setZero();
  if (dense) {
    user_grad.setZero();
    item_grad.setZero();
  }
  for (std::int32_t u : touched_users) user_hit_[static_cast<std::size_t>(u)] = 0;
  for (std::int32_t i : touched_items) item_hit_[static_cast<std::size_t>(i)] = 0;
  touched_users.clear();
  touched_items.clear();
  dense = false;
}

void GradAccum::add_user(std::int32_t user, const Eigen::RowVectorXd& g) {
  if (!user_hit_[static_cast<std::size_t>(user)]) {
    user_hit_[static_cast<std::size_t>(user)] = 1;
    touched_users.push_back(user);
  }
  user_grad.row(user) += g;
}

void GradAccum::add_item(std::int32_t item, const Eigen::RowVectorXd& g) {
  if (!item_hit_[static_cast<std::size_t>(item)]) {
    item_hit_[static_cast<std::size_t>(item)] = 1;
    touched_items.push_back(item);
  }
  item_grad.row(item) += g;
}

double bpr_sigma_coeff(const EmbeddingView& view, std::int32_t user,
                       std::int32_t i, std::int32_t j) {
  return sigmoid(view.score(user, j) - view.score(user, i));
}

GradAccum bpr_triple_gradients(const EmbeddingModel& model, std::int32_t user,
                               std::int32_t i, std::int32_t j) {
  GradAccum out;
  out.init(model.num_users(), model.num_items(), model.config.latent_dim);
  const double l2 = model.config.l2_reg;

  if (model.config.kind == BackboneKind::MF) {
    const EmbeddingView view = model.base_view();
    const double c = bpr_sigma_coeff(view, user, i, j);
    const Eigen::RowVectorXd eu = model.user_factors.row(user);
    const Eigen::RowVectorXd ei = model.item_factors.row(i);
    const Eigen::RowVectorXd ej = model.item_factors.row(j);
    out.add_user(user, (-c * (ei - ej) + 2.0 * l2 * eu).eval());
    out.add_item(i, (-c * eu + 2.0 * l2 * ei).eval());
    out.add_item(j, (c * eu + 2.0 * l2 * ej).eval());
    return out;
  }

  // LightGCN: loss gradient w.r.t. the propagated embeddings, pulled back
  // through the (symmetric) propagation, then per-row L2 on the base rows.
  Propagated prop = model.forward();
  const EmbeddingView view{&prop.users, &prop.items};
  const double c = bpr_sigma_coeff(view, user, i, j);
  Eigen::MatrixXd final_u =
      Eigen::MatrixXd::Zero(model.num_users(), model.config.latent_dim);
  Eigen::MatrixXd final_i =
      Eigen::MatrixXd::Zero(model.num_items(), model.config.latent_dim);
  const Eigen::RowVectorXd fu = prop.users.row(user);
  const Eigen::RowVectorXd fi = prop.items.row(i);
  const Eigen::RowVectorXd fj = prop.items.row(j);
  final_u.row(user) = -c * (fi - fj);
  final_i.row(i) = -c * fu;
  final_i.row(j) = c * fu;

  Propagated base = model.propagate_back(final_u, final_i);
  out.user_grad = std::move(base.users);
  out.item_grad = std::move(base.items);
  out.user_grad.row(user) += 2.0 * l2 * model.user_factors.row(user);
  out.item_grad.row(i) += 2.0 * l2 * model.item_factors.row(i);
  out.item_grad.row(j) += 2.0 * l2 * model.item_factors.row(j);
  out.dense = true;
  return out;
}

AdamState AdamState::zeros(const EmbeddingModel& model,
                           const AdamConfig& config) {
  AdamState s;
  s.config = config;
  const int d = model.config.latent_dim;
  s.m_user = Eigen::MatrixXd::Zero(model.num_users(), d);
  s.v_user = Eigen::MatrixXd::Zero(model.num_users(), d);
  s.m_item = Eigen::MatrixXd::Zero(model.num_items(), d);
  s.v_item = Eigen::MatrixXd::Zero(model.num_items(), d);
  return s;
}

namespace {

void adam_update_row(Eigen::MatrixXd& theta, Eigen::MatrixXd& m,
                     Eigen::MatrixXd& v, const Eigen::MatrixXd& grad,
                     std::int32_t row, const AdamConfig& cfg, double bc1,
                     double bc2) {
  const auto g = grad.row(row);
  if (!g.allFinite()) {
    throw std::runtime_error("non-finite gradient at row " + std::to_string(row));
  }
  m.row(row) = cfg.beta1 * m.row(row) + (1.0 - cfg.beta1) * g;
  v.row(row) = cfg.beta2 * v.row(row) + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const auto m_hat = m.row(row) / bc1;
  const auto v_hat = v.row(row) / bc2;
  theta.row(row) -=
      cfg.learning_rate *
      (m_hat.array() / (v_hat.array().sqrt() + cfg.eps)).matrix();
}

}  // namespace

void adam_step(AdamState& state, EmbeddingModel& model, const GradAccum& grads) {
  ++state.step;
  const AdamConfig& cfg = state.config;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  if (grads.dense) {
    for (std::int32_t u = 0; u < model.num_users(); ++u) {
      adam_update_row(model.user_factors, state.m_user, state.v_user,
                      grads.user_grad, u, cfg, bc1, bc2);
    }
    for (std::int32_t i = 0; i < model.num_items(); ++i) {
      adam_update_row(model.item_factors, state.m_item, state.v_item,
                      grads.item_grad, i, cfg, bc1, bc2);
    }
    return;
  }
  for (std::int32_t u : grads.touched_users) {
    adam_update_row(model.user_factors, state.m_user, state.v_user,
                    grads.user_grad, u, cfg, bc1, bc2);
  }
  for (std::int32_t i : grads.touched_items) {
    adam_update_row(model.item_factors, state.m_item, state.v_item,
                    grads.item_grad, i, cfg, bc1, bc2);
  }
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const json& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError("checkpoint row length mismatch");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

}  // namespace

void save_checkpoint(const EmbeddingModel& model, const std::string& path) {
  json j;
  j["backbone"] = backbone_name(model.config.kind);
  j["latent_dim"] = model.config.latent_dim;
  j["l2_reg"] = model.config.l2_reg;
  j["lightgcn_layers"] = model.config.lightgcn_layers;
  j["num_users"] = model.num_users();
  j["num_items"] = model.num_items();
  j["seed"] = model.init_seed;
  j["user_factors"] = matrix_to_json(model.user_factors);
  j["item_factors"] = matrix_to_json(model.item_factors);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
}

EmbeddingModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("invalid checkpoint " + path + ": " + e.what());
  }
  EmbeddingModel m;
  m.config.kind = backbone_from_name(j.at("backbone").get<std::string>());
  m.config.latent_dim = j.at("latent_dim").get<int>();
  m.config.l2_reg = j.at("l2_reg").get<double>();
  m.config.lightgcn_layers = j.at("lightgcn_layers").get<int>();
  m.init_seed = j.at("seed").get<std::uint64_t>();
  m.user_factors = matrix_from_json(j.at("user_factors"), m.config.latent_dim);
  m.item_factors = matrix_from_json(j.at("item_factors"), m.config.latent_dim);
  if (m.num_users() != j.at("num_users").get<std::int32_t>() ||
      m.num_items() != j.at("num_items").get<std::int32_t>()) {
    throw DataError("checkpoint header/matrix shape mismatch in " + path);
  }
  return m;
}

}  // namespace fairneg
