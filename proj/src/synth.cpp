#include "fairneg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "fairneg/common.hpp"
#include "fairneg/rng.hpp"

namespace fairneg {

namespace {

// Integer quotas from fractional shares, largest remainder rule.
std::vector<std::int64_t> quotas(const std::vector<double>& share,
                                 std::int64_t total) {
  const std::size_t n = share.size();
  double sum = 0.0;
  for (double s : share) sum += s;
  std::vector<std::int64_t> q(n);
  std::vector<std::pair<double, std::size_t>> rem(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = static_cast<double>(total) * share[i] / sum;
    q[i] = static_cast<std::int64_t>(std::floor(exact));
    rem[i] = {exact - std::floor(exact), i};
    assigned += q[i];
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) {
    ++q[rem[i % n].second];
  }
  return q;
}

}  // namespace

void SynthSpec::validate() const {
  if (users < 1 || items < 1) throw ConfigError("synth needs users, items >= 1");
  if (groups < 1 || groups > items) {
    throw ConfigError("synth group count must be in [1, items]");
  }
  auto check_share = [](const std::vector<double>& share, int groups,
                        const char* name) {
    if (share.empty()) return;
    if (static_cast<int>(share.size()) != groups) {
      throw ConfigError(std::string(name) + " length must equal group count");
    }
    for (double s : share) {
      if (!(s > 0.0)) {
        throw ConfigError(std::string(name) + " entries must be > 0");
      }
    }
  };
  check_share(item_share, groups, "synth_item_share");
  check_share(feedback_share, groups, "synth_feedback_share");
  if (interactions == 0 && (density <= 0.0 || density > 1.0)) {
    throw ConfigError("synth_density must be in (0, 1]");
  }
  if (group_bias < 0.0) throw ConfigError("synth_group_bias must be >= 0");
  if (home_boost < 0.0) throw ConfigError("synth_home_boost must be >= 0");
  if (latent_dim < 1) throw ConfigError("synth_latent_dim must be >= 1");
  if (!labels.empty() && static_cast<int>(labels.size()) != groups) {
    throw ConfigError("synth label list length must equal group count");
  }
}

SynthData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const std::int32_t nu = spec.users;
  const std::int32_t ni = spec.items;
  const int a = spec.groups;

  std::vector<double> item_share = spec.item_share;
  if (item_share.empty()) item_share.assign(static_cast<std::size_t>(a), 1.0);
  std::vector<double> feedback_share = spec.feedback_share;
  if (feedback_share.empty()) feedback_share = item_share;

  const std::vector<std::int64_t> group_items = quotas(item_share, ni);
  for (int g = 0; g < a; ++g) {
    if (group_items[static_cast<std::size_t>(g)] < 1) {
      throw ConfigError("synth item share leaves group " + std::to_string(g) +
                        " empty");
    }
  }

  SynthData out;
  out.groups.group_labels = spec.labels;
  if (out.groups.group_labels.empty()) {
    for (int g = 0; g < a; ++g) {
      out.groups.group_labels.push_back("group_" + std::to_string(g));
    }
  }
  out.groups.item_group.reserve(static_cast<std::size_t>(ni));
  std::vector<std::int32_t> group_start(static_cast<std::size_t>(a));
  {
    std::int32_t next = 0;
    for (int g = 0; g < a; ++g) {
      group_start[static_cast<std::size_t>(g)] = next;
      for (std::int64_t k = 0; k < group_items[static_cast<std::size_t>(g)]; ++k) {
        out.groups.item_group.push_back(g);
        ++next;
      }
    }
  }

  std::int64_t total = spec.interactions;
  if (total == 0) {
    total = static_cast<std::int64_t>(std::llround(
        spec.density * static_cast<double>(nu) * static_cast<double>(ni)));
  }
  const std::int64_t max_pairs = static_cast<std::int64_t>(nu) * ni;
  if (total > max_pairs) {
    throw ConfigError("synth interaction target exceeds users*items");
  }
  std::vector<std::int64_t> group_quota = quotas(feedback_share, total);
  for (int g = 0; g < a; ++g) {
    const std::int64_t cap =
        static_cast<std::int64_t>(nu) * group_items[static_cast<std::size_t>(g)];
    if (group_quota[static_cast<std::size_t>(g)] > cap) {
      throw ConfigError("synth feedback share overfills group " +
                        std::to_string(g));
    }
  }

  Rng rng(spec.seed);
  Rng latent_rng = rng.derive(11);

  // Planted latents; dot products scale to roughly unit variance.
  const int dl = spec.latent_dim;
  const double latent_scale = 1.0 / std::sqrt(static_cast<double>(dl));
  std::vector<std::vector<double>> user_latent(static_cast<std::size_t>(nu));
  for (auto& z : user_latent) {
    z.resize(static_cast<std::size_t>(dl));
    for (double& x : z) x = latent_rng.normal();
  }
  std::vector<std::vector<double>> item_latent(static_cast<std::size_t>(ni));
  for (auto& w : item_latent) {
    w.resize(static_cast<std::size_t>(dl));
    for (double& x : w) x = latent_rng.normal();
  }
  std::vector<std::vector<double>> user_group_bias(static_cast<std::size_t>(nu));
  {
    std::vector<double> share_cdf(static_cast<std::size_t>(a));
    double cum = 0.0, share_sum = 0.0;
    for (double s : feedback_share) share_sum += s;
    for (int g = 0; g < a; ++g) {
      cum += feedback_share[static_cast<std::size_t>(g)] / share_sum;
      share_cdf[static_cast<std::size_t>(g)] = cum;
    }
    for (auto& b : user_group_bias) {
      b.resize(static_cast<std::size_t>(a));
      for (double& x : b) x = spec.group_bias * latent_rng.normal();
      if (spec.home_boost > 0.0) {
        const double x = latent_rng.uniform_real();
        int home = 0;
        while (home < a - 1 && x >= share_cdf[static_cast<std::size_t>(home)]) {
          ++home;
        }
        b[static_cast<std::size_t>(home)] += spec.home_boost;
      }
    }
  }
  auto affinity = [&](std::int32_t u, std::int32_t i) {
    double dot = 0.0;
    for (int k = 0; k < dl; ++k) {
      dot += user_latent[static_cast<std::size_t>(u)][static_cast<std::size_t>(k)] *
             item_latent[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    const std::int32_t g = out.groups.item_group[static_cast<std::size_t>(i)];
    return spec.affinity * dot * latent_scale +
           user_group_bias[static_cast<std::size_t>(u)][static_cast<std::size_t>(g)];
  };

  std::vector<double> log_pop(static_cast<std::size_t>(ni));
  for (int g = 0; g < a; ++g) {
    const std::int32_t start = group_start[static_cast<std::size_t>(g)];
    for (std::int64_t r = 0; r < group_items[static_cast<std::size_t>(g)]; ++r) {
      log_pop[static_cast<std::size_t>(start + r)] =
          -spec.popularity_skew * std::log(static_cast<double>(r + 1));
    }
  }

  // Per-(user, group) CDF over the group's items, built lazily.
  std::vector<std::vector<std::vector<double>>> cdf_cache(
      static_cast<std::size_t>(a));
  for (auto& per_group : cdf_cache) {
    per_group.resize(static_cast<std::size_t>(nu));
  }
  auto pick_item = [&](std::int32_t u, int g, Rng& r) {
    auto& cdf = cdf_cache[static_cast<std::size_t>(g)][static_cast<std::size_t>(u)];
    const std::int32_t start = group_start[static_cast<std::size_t>(g)];
    const std::int64_t count = group_items[static_cast<std::size_t>(g)];
    if (cdf.empty()) {
      cdf.resize(static_cast<std::size_t>(count));
      double maxw = -1e300;
      for (std::int64_t k = 0; k < count; ++k) {
        const std::int32_t item = start + static_cast<std::int32_t>(k);
        cdf[static_cast<std::size_t>(k)] =
            log_pop[static_cast<std::size_t>(item)] + affinity(u, item);
        maxw = std::max(maxw, cdf[static_cast<std::size_t>(k)]);
      }
      double cum = 0.0;
      for (auto& w : cdf) {
        cum += std::exp(w - maxw);
        w = cum;
      }
      for (auto& w : cdf) w /= cum;
    }
    const double x = r.uniform_real();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
    const std::int64_t k =
        std::min<std::int64_t>(count - 1, it - cdf.begin());
    return start + static_cast<std::int32_t>(k);
  };

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(static_cast<std::size_t>(total) * 2);
  std::vector<Interaction> pairs;
  pairs.reserve(static_cast<std::size_t>(total));
  auto try_add = [&](std::int32_t u, std::int32_t i) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint32_t>(i);
    if (!seen.insert(key).second) return false;
    pairs.push_back({u, i});
    return true;
  };

  // First pass gives every user one interaction (while quota lasts), so the
  // split rarely strands users. Group choice leans toward the user's taste.
  std::vector<std::int64_t> remaining = group_quota;
  auto pick_group = [&](std::int32_t u, Rng& r) {
    double tot = 0.0;
    std::vector<double> w(static_cast<std::size_t>(a));
    for (int g = 0; g < a; ++g) {
      w[static_cast<std::size_t>(g)] =
          static_cast<double>(remaining[static_cast<std::size_t>(g)]) *
          std::exp(user_group_bias[static_cast<std::size_t>(u)][static_cast<std::size_t>(g)]);
      tot += w[static_cast<std::size_t>(g)];
    }
    double x = r.uniform_real() * tot;
    for (int g = 0; g < a; ++g) {
      x -= w[static_cast<std::size_t>(g)];
      if (x < 0.0) return g;
    }
    return a - 1;
  };
  for (std::int32_t u = 0; u < nu; ++u) {
    bool any_left = false;
    for (int g = 0; g < a; ++g) {
      any_left = any_left || remaining[static_cast<std::size_t>(g)] > 0;
    }
    if (!any_left) break;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const int g = pick_group(u, rng);
      if (remaining[static_cast<std::size_t>(g)] == 0) continue;
      if (try_add(u, pick_item(u, g, rng))) {
        --remaining[static_cast<std::size_t>(g)];
        break;
      }
    }
  }

  // Each group's remaining feedback goes to users weighted by their lean
  // toward that group.
  std::vector<std::vector<double>> user_cdf(static_cast<std::size_t>(a));
  for (int g = 0; g < a; ++g) {
    auto& cdf = user_cdf[static_cast<std::size_t>(g)];
    cdf.resize(static_cast<std::size_t>(nu));
    double cum = 0.0;
    for (std::int32_t u = 0; u < nu; ++u) {
      cum += std::exp(
          user_group_bias[static_cast<std::size_t>(u)][static_cast<std::size_t>(g)]);
      cdf[static_cast<std::size_t>(u)] = cum;
    }
    for (auto& c : cdf) c /= cum;
  }
  for (int g = 0; g < a; ++g) {
    const std::int32_t start = group_start[static_cast<std::size_t>(g)];
    const std::int64_t count = group_items[static_cast<std::size_t>(g)];
    const auto& cdf = user_cdf[static_cast<std::size_t>(g)];
    std::int64_t guard = 0;
    while (remaining[static_cast<std::size_t>(g)] > 0) {
      const double x = rng.uniform_real();
      const std::int32_t u = static_cast<std::int32_t>(
          std::min<std::ptrdiff_t>(nu - 1, std::upper_bound(cdf.begin(), cdf.end(), x) -
                                               cdf.begin()));
      if (try_add(u, pick_item(u, g, rng))) {
        --remaining[static_cast<std::size_t>(g)];
        guard = 0;
        continue;
      }
      // Dense corner: scan for any free pair in this group.
      if (++guard > 256) {
        bool placed = false;
        for (std::int32_t uu = 0; uu < nu && !placed; ++uu) {
          for (std::int64_t k = 0; k < count && !placed; ++k) {
            if (try_add(uu, start + static_cast<std::int32_t>(k))) {
              --remaining[static_cast<std::size_t>(g)];
              placed = true;
            }
          }
        }
        if (!placed) {
          throw std::runtime_error("synthetic group quota unsatisfiable");
        }
        guard = 0;
      }
    }
  }

  out.table = InteractionTable::from_pairs(std::move(pairs), nu, ni);
  return out;
}

void write_synthetic_files(const SynthSpec& spec,
                           const std::string& ratings_path,
                           const std::string& attributes_path) {
  const SynthData data = generate_synthetic(spec);
  std::ofstream ratings(ratings_path);
  if (!ratings) throw DataError("cannot write " + ratings_path);
  for (const Interaction& it : data.table.interactions()) {
    ratings << it.user << "::" << it.item << "::5::0\n";
  }
  std::ofstream attrs(attributes_path);
  if (!attrs) throw DataError("cannot write " + attributes_path);
  for (std::int32_t i = 0; i < data.table.num_items(); ++i) {
    attrs << i << ','
          << data.groups.group_labels[static_cast<std::size_t>(
                 data.groups.item_group[static_cast<std::size_t>(i)])]
          << "\n";
  }
}

SynthSpec ml1m2_profile(std::uint64_t seed) {
  SynthSpec spec;
  spec.users = 4680;
  spec.items = 472;
  spec.groups = 2;
  spec.item_share = {211.0 / 472.0, 261.0 / 472.0};
  spec.feedback_share = {136816.0 / 194610.0, 57794.0 / 194610.0};
  spec.interactions = 194610;
  spec.popularity_skew = 1.0;
  spec.affinity = 1.5;
  spec.group_bias = 0.6;
  spec.home_boost = 1.5;
  spec.latent_dim = 8;
  spec.seed = seed;
  spec.labels = {"Sci-Fi", "Horror"};
  return spec;
}

}  // namespace fairneg
