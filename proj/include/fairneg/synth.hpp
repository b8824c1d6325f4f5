#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairneg/interactions.hpp"

namespace fairneg {

// Synthetic implicit-feedback generator: items are split into groups by
// share; interactions come from a planted low-rank preference model with a
// within-group popularity skew, so factor models have real signal to learn.
// Group feedback totals hit their share targets exactly.
struct SynthSpec {
  std::int32_t users = 50;
  std::int32_t items = 40;
  int groups = 2;
  std::vector<double> item_share;      // default: equal
  std::vector<double> feedback_share;  // default: proportional to item_share
  std::int64_t interactions = 0;       // 0 -> round(density * users * items)
  double density = 0.1;
  double popularity_skew = 0.8;        // zipf exponent within each group
  double affinity = 1.5;               // planted preference strength
  // Std-dev of a per-user, per-group taste offset. Positive values polarize
  // users toward some groups and concentrate each group's feedback on the
  // users that lean toward it.
  double group_bias = 0.0;
  // Deterministic taste boost for one "home" group per user (home drawn by
  // feedback share). Creates distinct fan subpopulations per group.
  double home_boost = 0.0;
  int latent_dim = 8;
  std::uint64_t seed = 1;
  std::vector<std::string> labels;     // default: group_0, group_1, ...

  void validate() const;
};

struct SynthData {
  InteractionTable table;
  GroupMap groups;
};

SynthData generate_synthetic(const SynthSpec& spec);

// Writes MovieLens-style ratings ("user::item::5::0") and an attribute CSV
// ("item,label"), so the generated data flows through the normal ingestion.
void write_synthetic_files(const SynthSpec& spec,
                           const std::string& ratings_path,
                           const std::string& attributes_path);

// The ML1M-2 profile (Table-scale marginals: 4,680 users; 472 items in a
// 211/261 split; 194,610 interactions in a 136,816/57,794 split).
SynthSpec ml1m2_profile(std::uint64_t seed);

}  // namespace fairneg
