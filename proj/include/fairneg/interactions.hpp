#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fairneg/common.hpp"

namespace fairneg {

struct Interaction {
  std::int32_t user = 0;
  std::int32_t item = 0;
  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Deduplicated implicit-feedback matrix over contiguous 0-based indices.
// Immutable after construction; safe to share read-only across threads.
class InteractionTable {
 public:
  InteractionTable() = default;

  // Collapses duplicate (user, item) pairs, keeping first-occurrence order.
  static InteractionTable from_pairs(std::vector<Interaction> pairs,
                                     std::int32_t num_users,
                                     std::int32_t num_items);

  const std::vector<Interaction>& interactions() const { return interactions_; }
  std::int32_t num_users() const { return num_users_; }
  std::int32_t num_items() const { return num_items_; }
  std::size_t size() const { return interactions_.size(); }

  // V_u^+, sorted ascending.
  const std::vector<std::int32_t>& positives(std::int32_t user) const {
    return user_positives_[static_cast<std::size_t>(user)];
  }
  bool is_positive(std::int32_t user, std::int32_t item) const;

  // V_u^- = catalog minus V_u^+, ascending.
  std::vector<std::int32_t> unobserved_items(std::int32_t user) const;

  // Per-item interaction count (popularity).
  std::vector<std::int64_t> item_counts() const;

  // Hash of the canonical "user item\n" text form.
  std::uint64_t content_hash() const;

 private:
  std::vector<Interaction> interactions_;
  std::vector<std::vector<std::int32_t>> user_positives_;
  std::int32_t num_users_ = 0;
  std::int32_t num_items_ = 0;
};

// Disjoint item -> group assignment covering the whole catalog.
struct GroupMap {
  std::vector<std::int32_t> item_group;  // size num_items, values in [0, A)
  std::vector<std::string> group_labels;

  std::int32_t group_count() const {
    return static_cast<std::int32_t>(group_labels.size());
  }
};

struct DataSplit {
  InteractionTable train;
  InteractionTable validation;
  InteractionTable test;
  std::uint64_t seed = 0;
};

// Text-file layout for interaction records: one record per line, fields
// joined by `separator`, user/item picked by column index. Extra columns
// (rating, timestamp) are ignored.
struct TextFormat {
  std::string separator = "::";
  int user_column = 0;
  int item_column = 1;
};

struct RawPair {
  std::string user;
  std::string item;
  friend bool operator==(const RawPair&, const RawPair&) = default;
};

struct RawAttribute {
  std::string item;
  std::string label;
};

// Reads every (user, item) pair in file order. Throws DataError on IO
// failure or a malformed record (message carries the line number).
std::vector<RawPair> load_interactions(const std::string& path,
                                       const TextFormat& format);

// Item-attribute file: columns (item, group-label).
std::vector<RawAttribute> load_attributes(const std::string& path,
                                          const std::string& separator = ",");

struct ReindexResult {
  InteractionTable table;
  GroupMap groups;
  std::vector<std::string> user_ids;  // index -> raw id
  std::vector<std::string> item_ids;
};

// Maps raw ids to contiguous 0-based indices and collapses duplicates.
// The attribute records define the catalog: items never interacted stay in
// it. Users are indexed by first appearance in `pairs`, items and group
// labels by first appearance in `attributes`. Throws DataError when an
// interacted item has no attribute record or has conflicting labels.
ReindexResult reindex(const std::vector<RawPair>& pairs,
                      const std::vector<RawAttribute>& attributes);

// 60/20/20 with both 20% parts floored and the remainder going to train.
std::array<std::size_t, 3> split_sizes(std::size_t n);

// Global uniform shuffle then contiguous cut; deterministic under seed.
DataSplit split(const InteractionTable& table, std::uint64_t seed);

struct GroupStats {
  std::int64_t item_count = 0;
  std::int64_t feedback_count = 0;
  double feedback_per_item = 0.0;
};

std::vector<GroupStats> group_stats(const InteractionTable& table,
                                    const GroupMap& groups);

}  // namespace fairneg
