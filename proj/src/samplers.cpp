#include "fairneg/samplers.hpp"

#include <algorithm>
#include <cmath>

#include "fairneg/common.hpp"

namespace fairneg {

GroupDistribution project_simplex(const Eigen::VectorXd& raw, double eps) {
  if (raw.size() == 0) throw std::invalid_argument("empty simplex input");
  if (!raw.allFinite()) throw std::invalid_argument("non-finite simplex input");
  const int a = static_cast<int>(raw.size());
  GroupDistribution out;
  out.floor_eps = eps;
  if (eps * a >= 1.0) {
    out.p = Eigen::VectorXd::Constant(a, 1.0 / a);
    return out;
  }

  std::vector<char> floored(static_cast<std::size_t>(a), 0);
  while (true) {
    int n_floored = 0;
    double unfloored_sum = 0.0;
    for (int g = 0; g < a; ++g) {
      if (floored[static_cast<std::size_t>(g)] || raw[g] < eps) {
        floored[static_cast<std::size_t>(g)] = 1;
        ++n_floored;
      } else {
        unfloored_sum += raw[g];
      }
    }
    if (n_floored == a || unfloored_sum <= 0.0) {
      out.p = Eigen::VectorXd::Constant(a, 1.0 / a);
      return out;
    }
    const double free_mass = 1.0 - eps * n_floored;
    const double scale = free_mass / unfloored_sum;
    bool newly_floored = false;
    for (int g = 0; g < a; ++g) {
      if (!floored[static_cast<std::size_t>(g)] && raw[g] * scale < eps) {
        floored[static_cast<std::size_t>(g)] = 1;
        newly_floored = true;
      }
    }
    if (newly_floored) continue;
    out.p.resize(a);
    for (int g = 0; g < a; ++g) {
      out.p[g] = floored[static_cast<std::size_t>(g)] ? eps : raw[g] * scale;
    }
    return out;
  }
}

std::string strategy_name(SamplerStrategy s) {
  switch (s) {
    case SamplerStrategy::UNS: return "uns";
    case SamplerStrategy::NNCF: return "nncf";
    case SamplerStrategy::DNS: return "dns";
    case SamplerStrategy::FairStatic: return "fairstatic";
    case SamplerStrategy::FairNeg: return "fairneg";
  }
  return "?";
}

SamplerStrategy strategy_from_name(const std::string& name) {
  if (name == "uns") return SamplerStrategy::UNS;
  if (name == "nncf") return SamplerStrategy::NNCF;
  if (name == "dns") return SamplerStrategy::DNS;
  if (name == "fairstatic") return SamplerStrategy::FairStatic;
  if (name == "fairneg") return SamplerStrategy::FairNeg;
  throw ConfigError("unknown sampler strategy: \"" + name + "\"");
}

void SamplerConfig::validate() const {
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must be in [0, 1]");
  if (tau <= 0.0) throw ConfigError("tau must be > 0");
  if (dns_pool < 1) throw ConfigError("dns_pool must be >= 1");
  if (candidate_pool < 0) throw ConfigError("candidate_pool must be >= 0");
}

CandidateSet candidates_for(const InteractionTable& train, std::int32_t user) {
  CandidateSet c;
  c.user = user;
  c.items = train.unobserved_items(user);
  if (c.items.empty()) {
    throw DataError("user " + std::to_string(user) +
                    " has no unobserved items to sample from");
  }
  return c;
}

std::int32_t sample_from(const CandidateSet& candidates,
                         const Eigen::VectorXd& probs, Rng& rng) {
  const double r = rng.uniform_real();
  double cum = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    cum += probs[k];
    if (r < cum) return candidates.items[static_cast<std::size_t>(k)];
  }
  return candidates.items.back();
}

std::int32_t sample_uns(std::int32_t user, const InteractionTable& train,
                        Rng& rng) {
  const CandidateSet c = candidates_for(train, user);
  return c.items[rng.uniform_index(c.items.size())];
}

std::int32_t sample_popularity_cached(std::int32_t user,
                                      const InteractionTable& train,
                                      const std::vector<std::int64_t>& counts,
                                      Rng& rng, double exponent) {
  const CandidateSet c = candidates_for(train, user);
  Eigen::VectorXd w(static_cast<Eigen::Index>(c.items.size()));
  for (std::size_t k = 0; k < c.items.size(); ++k) {
    const std::int64_t count =
        std::max<std::int64_t>(counts[static_cast<std::size_t>(c.items[k])], 1);
    w[static_cast<Eigen::Index>(k)] =
        std::pow(static_cast<double>(count), exponent);
  }
  w /= w.sum();
  return sample_from(c, w, rng);
}

std::int32_t sample_popularity(std::int32_t user, const InteractionTable& train,
                               Rng& rng, double exponent) {
  return sample_popularity_cached(user, train, train.item_counts(), rng,
                                  exponent);
}

std::int32_t sample_dns(std::int32_t user, const EmbeddingView& view,
                        const InteractionTable& train, Rng& rng, int pool_size) {
  const CandidateSet c = candidates_for(train, user);
  std::int32_t best_item = -1;
  double best_score = 0.0;
  for (int t = 0; t < pool_size; ++t) {
    const std::int32_t item = c.items[rng.uniform_index(c.items.size())];
    const double s = view.score(user, item);
    if (best_item < 0 || s > best_score ||
        (s == best_score && item < best_item)) {
      best_item = item;
      best_score = s;
    }
  }
  return best_item;
}

Eigen::VectorXd fair_prob(const CandidateSet& candidates, const GroupMap& groups,
                          const GroupDistribution& p) {
  if (candidates.items.empty()) throw DataError("empty candidate set");
  const int a = groups.group_count();
  std::vector<std::int64_t> count(static_cast<std::size_t>(a), 0);
  for (std::int32_t item : candidates.items) {
    ++count[static_cast<std::size_t>(groups.item_group[static_cast<std::size_t>(item)])];
  }
  double present_mass = 0.0;
  for (int g = 0; g < a; ++g) {
    if (count[static_cast<std::size_t>(g)] > 0) present_mass += p.p[g];
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(candidates.items.size()));
  for (std::size_t k = 0; k < candidates.items.size(); ++k) {
    const std::int32_t g =
        groups.item_group[static_cast<std::size_t>(candidates.items[k])];
    out[static_cast<Eigen::Index>(k)] =
        (p.p[g] / present_mass) /
        static_cast<double>(count[static_cast<std::size_t>(g)]);
  }
  return out;
}

Eigen::VectorXd importance_prob(const CandidateSet& candidates,
                                const EmbeddingView& view, double tau) {
  if (tau <= 0.0) throw ConfigError("tau must be > 0");
  const Eigen::VectorXd all_scores = view.score_all(candidates.user);
  Eigen::VectorXd s(static_cast<Eigen::Index>(candidates.items.size()));
  for (std::size_t k = 0; k < candidates.items.size(); ++k) {
    s[static_cast<Eigen::Index>(k)] = all_scores[candidates.items[k]];
  }
  const double m = s.maxCoeff();
  Eigen::VectorXd w = ((s.array() - m) / tau).exp();
  w /= w.sum();
  return w;
}

Eigen::VectorXd mixup_prob(const Eigen::VectorXd& fair,
                           const Eigen::VectorXd& importance, double beta) {
  if (fair.size() != importance.size()) {
    throw std::invalid_argument("mixup over mismatched candidate sets");
  }
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must be in [0, 1]");
  return beta * fair + (1.0 - beta) * importance;
}

namespace {

// Uniform pre-pool: keeps a random subset of the candidates (ascending
// order preserved). Documented approximation for large catalogs.
CandidateSet restrict_pool(CandidateSet c, int pool, Rng& rng) {
  if (pool <= 0 || static_cast<std::size_t>(pool) >= c.items.size()) return c;
  for (int k = 0; k < pool; ++k) {
    const std::size_t j =
        static_cast<std::size_t>(k) +
        rng.uniform_index(c.items.size() - static_cast<std::size_t>(k));
    std::swap(c.items[static_cast<std::size_t>(k)], c.items[j]);
  }
  c.items.resize(static_cast<std::size_t>(pool));
  std::sort(c.items.begin(), c.items.end());
  return c;
}

std::int32_t draw_fair_mixup(const CandidateSet& candidates,
                             const EmbeddingView& view, const GroupMap& groups,
                             const GroupDistribution& p,
                             const SamplerConfig& config, Rng& rng) {
  const Eigen::VectorXd fair = fair_prob(candidates, groups, p);
  if (config.beta >= 1.0) return sample_from(candidates, fair, rng);
  const Eigen::VectorXd imp = importance_prob(candidates, view, config.tau);
  return sample_from(candidates, mixup_prob(fair, imp, config.beta), rng);
}

}  // namespace

std::int32_t sample_fairneg(std::int32_t user, const EmbeddingView& view,
                            const GroupMap& groups, const InteractionTable& train,
                            const GroupDistribution& p, const SamplerConfig& config,
                            Rng& rng) {
  CandidateSet c = candidates_for(train, user);
  c = restrict_pool(std::move(c), config.candidate_pool, rng);
  return draw_fair_mixup(c, view, groups, p, config, rng);
}

GroupDistribution fairstatic_distribution(const InteractionTable& table,
                                          const GroupMap& groups,
                                          double floor_eps) {
  const int a = groups.group_count();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(a);
  for (const Interaction& it : table.interactions()) {
    counts[groups.item_group[static_cast<std::size_t>(it.item)]] += 1.0;
  }
  const double total = counts.sum();
  if (total <= 0.0) return project_simplex(counts, floor_eps);
  return project_simplex(counts / total, floor_eps);
}

NegativeSampler::NegativeSampler(const SamplerConfig& config,
                                 const InteractionTable& train,
                                 const GroupMap& groups)
    : config_(config), train_(train), groups_(groups) {
  config_.validate();
  if (config_.strategy == SamplerStrategy::NNCF) {
    item_counts_ = train.item_counts();
  }
}

std::int32_t NegativeSampler::draw(std::int32_t user, Rng& rng) const {
  switch (config_.strategy) {
    case SamplerStrategy::UNS:
      return sample_uns(user, train_, rng);
    case SamplerStrategy::NNCF:
      return sample_popularity_cached(user, train_, item_counts_, rng,
                                      config_.popularity_exponent);
    case SamplerStrategy::DNS:
      return sample_dns(user, view_, train_, rng, config_.dns_pool);
    case SamplerStrategy::FairStatic:
    case SamplerStrategy::FairNeg: {
      if (distribution_ == nullptr) {
        throw std::logic_error("fair sampling without a group distribution");
      }
      CandidateSet c = candidates_for(train_, user);
      c = restrict_pool(std::move(c), config_.candidate_pool, rng);
      SamplerConfig effective = config_;
      if (config_.strategy == SamplerStrategy::FairStatic) effective.beta = 1.0;
      return draw_fair_mixup(c, view_, groups_, *distribution_, effective, rng);
    }
  }
  throw std::logic_error("unreachable sampler strategy");
}

}  // namespace fairneg
