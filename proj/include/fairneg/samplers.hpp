#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fairneg/group_distribution.hpp"
#include "fairneg/interactions.hpp"
#include "fairneg/model.hpp"
#include "fairneg/rng.hpp"

namespace fairneg {

enum class SamplerStrategy { UNS, NNCF, DNS, FairStatic, FairNeg };

std::string strategy_name(SamplerStrategy s);
SamplerStrategy strategy_from_name(const std::string& name);

struct SamplerConfig {
  SamplerStrategy strategy = SamplerStrategy::UNS;
  double beta = 0.5;                 // mixup weight toward the fair term
  double tau = 0.4;                  // softmax temperature
  int dns_pool = 16;
  double popularity_exponent = 1.0;
  // > 0 restricts FairNeg/FairStatic candidates to a uniform pre-pool of
  // this size (approximation for large catalogs; 0 = exact full set).
  int candidate_pool = 0;

  void validate() const;
};

// A user's negative candidates V_u^- (train-unobserved), ascending by item
// index. All candidate probability vectors align with `items`.
struct CandidateSet {
  std::int32_t user = 0;
  std::vector<std::int32_t> items;
};

// Throws DataError when the user has no unobserved items.
CandidateSet candidates_for(const InteractionTable& train, std::int32_t user);

// Inverse-CDF draw over the candidate list.
std::int32_t sample_from(const CandidateSet& candidates,
                         const Eigen::VectorXd& probs, Rng& rng);

// --- Baseline samplers -----------------------------------------------------

std::int32_t sample_uns(std::int32_t user, const InteractionTable& train,
                        Rng& rng);

// Probability proportional to train popularity^exponent; items never
// interacted count as 1.
std::int32_t sample_popularity(std::int32_t user, const InteractionTable& train,
                               Rng& rng, double exponent);
std::int32_t sample_popularity_cached(std::int32_t user,
                                      const InteractionTable& train,
                                      const std::vector<std::int64_t>& counts,
                                      Rng& rng, double exponent);

// pool_size uniform draws with replacement; returns the best-scored one,
// ties to the smallest item index.
std::int32_t sample_dns(std::int32_t user, const EmbeddingView& view,
                        const InteractionTable& train, Rng& rng, int pool_size);

// --- FairNeg distribution pieces -------------------------------------------

// p_j = p_{z(j)} / #candidates in z(j); groups with no candidates donate
// their mass proportionally to the groups that have some.
Eigen::VectorXd fair_prob(const CandidateSet& candidates, const GroupMap& groups,
                          const GroupDistribution& p);

// Softmax of score/tau over the candidates, max-subtracted.
Eigen::VectorXd importance_prob(const CandidateSet& candidates,
                                const EmbeddingView& view, double tau);

// beta * fair + (1 - beta) * importance.
Eigen::VectorXd mixup_prob(const Eigen::VectorXd& fair,
                           const Eigen::VectorXd& importance, double beta);

std::int32_t sample_fairneg(std::int32_t user, const EmbeddingView& view,
                            const GroupMap& groups, const InteractionTable& train,
                            const GroupDistribution& p, const SamplerConfig& config,
                            Rng& rng);

// Each group's share of the positive interactions in `table`, floored onto
// the simplex.
GroupDistribution fairstatic_distribution(const InteractionTable& table,
                                          const GroupMap& groups,
                                          double floor_eps = 1e-3);

// Strategy dispatch used by the trainer. Holds only references; the view
// and distribution are snapshots owned by the caller.
class NegativeSampler {
 public:
  NegativeSampler(const SamplerConfig& config, const InteractionTable& train,
                  const GroupMap& groups);

  void set_view(const EmbeddingView& view) { view_ = view; }
  void set_distribution(const GroupDistribution* p) { distribution_ = p; }

  std::int32_t draw(std::int32_t user, Rng& rng) const;

 private:
  SamplerConfig config_;
  const InteractionTable& train_;
  const GroupMap& groups_;
  std::vector<std::int64_t> item_counts_;
  EmbeddingView view_;
  const GroupDistribution* distribution_ = nullptr;
};

}  // namespace fairneg
