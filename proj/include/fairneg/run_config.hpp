#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairneg/common.hpp"
#include "fairneg/metrics.hpp"
#include "fairneg/synth.hpp"
#include "fairneg/trainer.hpp"

namespace fairneg {

// Flat INI-style configuration ("key = value" lines, '#'/';' comments).
// Every key must be registered; values are type-checked on access. Flag
// overrides win over file values.
class RunConfig {
 public:
  static RunConfig load(const std::string& path,
                        const std::vector<std::string>& overrides = {});
  static RunConfig from_overrides(const std::vector<std::string>& overrides);

  bool has(const std::string& key) const;  // set and non-empty
  std::string get_string(const std::string& key) const;
  std::string require_string(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::int64_t get_i64(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  // Copy with one key replaced (sweep points, derived evaluations).
  RunConfig with(const std::string& key, const std::string& value) const;

  // Effective configuration, one sorted "key=value" per line.
  std::string canonical() const;
  std::uint64_t config_hash() const { return fnv1a(canonical()); }
  const std::map<std::string, std::string>& values() const { return values_; }

  TrainConfig make_train_config() const;
  SynthSpec make_synth_spec() const;
  GroupRecallAggregation aggregation() const;
  std::vector<int> metric_ks() const;

 private:
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> values_;
};

}  // namespace fairneg
