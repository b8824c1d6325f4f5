#include "fairneg/run_config.hpp"

#include <algorithm>
#include <set>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace fairneg {

namespace {

enum class KeyType { String, Int, I64, U64, Double, Bool };

struct KeySpec {
  KeyType type;
  const char* default_value;
};

const std::unordered_map<std::string, KeySpec>& registry() {
  static const std::unordered_map<std::string, KeySpec> keys = {
      // io
      {"data_dir", {KeyType::String, ""}},
      {"out_dir", {KeyType::String, ""}},
      {"run_dir", {KeyType::String, ""}},
      {"runs", {KeyType::String, ""}},
      // prepare
      {"source", {KeyType::String, "files"}},
      {"ratings_path", {KeyType::String, ""}},
      {"attributes_path", {KeyType::String, ""}},
      {"ratings_separator", {KeyType::String, "::"}},
      {"attributes_separator", {KeyType::String, ","}},
      {"ratings_user_column", {KeyType::Int, "0"}},
      {"ratings_item_column", {KeyType::Int, "1"}},
      {"group_labels", {KeyType::String, ""}},
      {"split_seed", {KeyType::U64, "42"}},
      // synth
      {"synth_users", {KeyType::Int, "50"}},
      {"synth_items", {KeyType::Int, "40"}},
      {"synth_groups", {KeyType::Int, "2"}},
      {"synth_item_share", {KeyType::String, ""}},
      {"synth_feedback_share", {KeyType::String, ""}},
      {"synth_interactions", {KeyType::I64, "0"}},
      {"synth_density", {KeyType::Double, "0.1"}},
      {"synth_popularity_skew", {KeyType::Double, "0.8"}},
      {"synth_affinity", {KeyType::Double, "1.5"}},
      {"synth_group_bias", {KeyType::Double, "0"}},
      {"synth_home_boost", {KeyType::Double, "0"}},
      {"synth_latent_dim", {KeyType::Int, "8"}},
      {"synth_seed", {KeyType::U64, "1"}},
      {"synth_labels", {KeyType::String, ""}},
      // backbone
      {"backbone", {KeyType::String, "mf"}},
      {"latent_dim", {KeyType::Int, "64"}},
      {"l2_reg", {KeyType::Double, "0.01"}},
      {"lightgcn_layers", {KeyType::Int, "3"}},
      {"learning_rate", {KeyType::Double, "-1"}},
      {"adam_beta1", {KeyType::Double, "0.9"}},
      {"adam_beta2", {KeyType::Double, "0.999"}},
      {"adam_eps", {KeyType::Double, "1e-8"}},
      // sampler
      {"strategy", {KeyType::String, ""}},
      {"beta", {KeyType::Double, "0.5"}},
      {"tau", {KeyType::Double, "0.4"}},
      {"dns_pool", {KeyType::Int, "16"}},
      {"popularity_exponent", {KeyType::Double, "1.0"}},
      {"candidate_pool", {KeyType::Int, "0"}},
      // outer optimizer
      {"gamma", {KeyType::Double, "0.1"}},
      {"alpha", {KeyType::Double, "0.1"}},
      {"simplex_floor", {KeyType::Double, "1e-3"}},
      {"dynamic", {KeyType::Bool, "true"}},
      {"gbce_full_limit", {KeyType::U64, "500000"}},
      {"gbce_subsample", {KeyType::U64, "200000"}},
      // trainer
      {"epochs_max", {KeyType::Int, "100"}},
      {"batch_size", {KeyType::Int, "1024"}},
      {"patience", {KeyType::Int, "10"}},
      {"train_seed", {KeyType::U64, "7"}},
      {"eval_k", {KeyType::Int, "20"}},
      // metrics
      {"metric_ks", {KeyType::String, "20,30"}},
      {"group_recall_aggregation", {KeyType::String, "micro"}},
      // sweep
      {"sweep_gamma", {KeyType::String, ""}},
      {"sweep_beta", {KeyType::String, ""}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void check_typed(const std::string& key, const std::string& value) {
  const KeySpec& spec = registry().at(key);
  if (value.empty()) return;
  const char* begin = value.c_str();
  char* end = nullptr;
  switch (spec.type) {
    case KeyType::String:
      return;
    case KeyType::Int:
    case KeyType::I64:
    case KeyType::U64:
      std::strtoll(begin, &end, 10);
      break;
    case KeyType::Double:
      std::strtod(begin, &end);
      break;
    case KeyType::Bool:
      if (value != "true" && value != "false" && value != "0" && value != "1") {
        throw ConfigError("key \"" + key + "\" expects a bool, got \"" + value +
                          "\"");
      }
      return;
  }
  if (end == begin || *end != '\0') {
    throw ConfigError("key \"" + key + "\" has a non-numeric value \"" + value +
                      "\"");
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (registry().find(key) == registry().end()) {
    throw ConfigError("unknown configuration key: \"" + key + "\"");
  }
  check_typed(key, value);
  values_[key] = value;
}

RunConfig RunConfig::load(const std::string& path,
                          const std::vector<std::string>& overrides) {
  RunConfig cfg;
  for (const auto& [key, spec] : registry()) {
    cfg.values_[key] = spec.default_value;
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("malformed config line at " + path + ":" +
                        std::to_string(line_no) + ": \"" + line + "\"");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  for (const std::string& ov : overrides) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override must be key=value: \"" + ov + "\"");
    }
    cfg.set(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::from_overrides(const std::vector<std::string>& overrides) {
  RunConfig cfg;
  for (const auto& [key, spec] : registry()) {
    cfg.values_[key] = spec.default_value;
  }
  for (const std::string& ov : overrides) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override must be key=value: \"" + ov + "\"");
    }
    cfg.set(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }
  return cfg;
}

bool RunConfig::has(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError("unknown configuration key: \"" + key + "\"");
  }
  return !it->second.empty();
}

std::string RunConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError("unknown configuration key: \"" + key + "\"");
  }
  return it->second;
}

std::string RunConfig::require_string(const std::string& key) const {
  if (!has(key)) throw ConfigError("required key \"" + key + "\" is not set");
  return get_string(key);
}

int RunConfig::get_int(const std::string& key) const {
  return static_cast<int>(get_i64(key));
}

std::int64_t RunConfig::get_i64(const std::string& key) const {
  const std::string v = require_string(key);
  return std::strtoll(v.c_str(), nullptr, 10);
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string v = require_string(key);
  return std::strtoull(v.c_str(), nullptr, 10);
}

double RunConfig::get_double(const std::string& key) const {
  const std::string v = require_string(key);
  return std::strtod(v.c_str(), nullptr);
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string v = require_string(key);
  return v == "true" || v == "1";
}

std::vector<std::string> RunConfig::get_string_list(const std::string& key) const {
  return split_list(get_string(key));
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& s : get_string_list(key)) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
      throw ConfigError("key \"" + key + "\" has a non-numeric list entry \"" +
                        s + "\"");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (double v : get_double_list(key)) out.push_back(static_cast<int>(v));
  return out;
}

RunConfig RunConfig::with(const std::string& key, const std::string& value) const {
  RunConfig copy = *this;
  copy.set(key, value);
  return copy;
}

std::string RunConfig::canonical() const {
  // Location keys are excluded: artifacts should hash the same no matter
  // where inputs sit or outputs land (content hashes pin the data itself).
  static const std::set<std::string> location_keys = {
      "out_dir", "run_dir", "runs", "data_dir", "ratings_path",
      "attributes_path"};
  std::ostringstream out;
  for (const auto& [key, value] : values_) {
    if (location_keys.count(key)) continue;
    out << key << '=' << value << '\n';
  }
  return out.str();
}

TrainConfig RunConfig::make_train_config() const {
  TrainConfig t;
  t.model.kind = backbone_from_name(require_string("backbone"));
  t.model.latent_dim = get_int("latent_dim");
  t.model.l2_reg = get_double("l2_reg");
  t.model.lightgcn_layers = get_int("lightgcn_layers");

  double lr = get_double("learning_rate");
  if (lr <= 0.0) {
    lr = t.model.kind == BackboneKind::MF ? 0.01 : 0.001;
  }
  t.adam.learning_rate = lr;
  t.adam.beta1 = get_double("adam_beta1");
  t.adam.beta2 = get_double("adam_beta2");
  t.adam.eps = get_double("adam_eps");

  t.sampler.strategy = strategy_from_name(require_string("strategy"));
  t.sampler.beta = get_double("beta");
  t.sampler.tau = get_double("tau");
  t.sampler.dns_pool = get_int("dns_pool");
  t.sampler.popularity_exponent = get_double("popularity_exponent");
  t.sampler.candidate_pool = get_int("candidate_pool");

  t.epochs_max = get_int("epochs_max");
  t.batch_size = get_int("batch_size");
  t.patience = get_int("patience");
  t.eval_k = get_int("eval_k");
  t.seed = get_u64("train_seed");
  t.dynamic = get_bool("dynamic");
  t.gamma = get_double("gamma");
  t.alpha = get_double("alpha");
  t.simplex_floor = get_double("simplex_floor");
  t.gbce.full_limit = get_u64("gbce_full_limit");
  t.gbce.subsample = get_u64("gbce_subsample");
  t.aggregation = aggregation();
  t.validate();
  return t;
}

SynthSpec RunConfig::make_synth_spec() const {
  SynthSpec s;
  s.users = get_int("synth_users");
  s.items = get_int("synth_items");
  s.groups = get_int("synth_groups");
  if (has("synth_item_share")) s.item_share = get_double_list("synth_item_share");
  if (has("synth_feedback_share")) {
    s.feedback_share = get_double_list("synth_feedback_share");
  }
  s.interactions = get_i64("synth_interactions");
  s.density = get_double("synth_density");
  s.popularity_skew = get_double("synth_popularity_skew");
  s.affinity = get_double("synth_affinity");
  s.group_bias = get_double("synth_group_bias");
  s.home_boost = get_double("synth_home_boost");
  s.latent_dim = get_int("synth_latent_dim");
  s.seed = get_u64("synth_seed");
  if (has("synth_labels")) s.labels = get_string_list("synth_labels");
  s.validate();
  return s;
}

GroupRecallAggregation RunConfig::aggregation() const {
  return aggregation_from_name(require_string("group_recall_aggregation"));
}

std::vector<int> RunConfig::metric_ks() const {
  const std::vector<int> ks = get_int_list("metric_ks");
  if (ks.empty()) throw ConfigError("metric_ks must list at least one k");
  for (int k : ks) {
    if (k < 1) throw ConfigError("metric_ks entries must be >= 1");
  }
  return ks;
}

}  // namespace fairneg
