#include "fairneg/interactions.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "fairneg/rng.hpp"

namespace fairneg {

namespace {

std::vector<std::string> split_fields(const std::string& line,
                                      const std::string& separator) {
  std::vector<std::string> fields;
  if (separator.empty()) {
    fields.push_back(line);
    return fields;
  }
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(separator, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + separator.size();
  }
  return fields;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

InteractionTable InteractionTable::from_pairs(std::vector<Interaction> pairs,
                                              std::int32_t num_users,
                                              std::int32_t num_items) {
  InteractionTable t;
  t.num_users_ = num_users;
  t.num_items_ = num_items;
  t.user_positives_.assign(static_cast<std::size_t>(num_users), {});
  t.interactions_.reserve(pairs.size());

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(pairs.size() * 2);
  for (const Interaction& p : pairs) {
    if (p.user < 0 || p.user >= num_users || p.item < 0 || p.item >= num_items) {
      throw DataError("interaction index out of range: user " +
                      std::to_string(p.user) + ", item " +
                      std::to_string(p.item));
    }
    const std::uint64_t key = (static_cast<std::uint64_t>(p.user) << 32) |
                              static_cast<std::uint32_t>(p.item);
    if (!seen.insert(key).second) continue;
    t.interactions_.push_back(p);
    t.user_positives_[static_cast<std::size_t>(p.user)].push_back(p.item);
  }
  for (auto& pos : t.user_positives_) {
    std::sort(pos.begin(), pos.end());
  }
  return t;
}

bool InteractionTable::is_positive(std::int32_t user, std::int32_t item) const {
  const auto& pos = user_positives_[static_cast<std::size_t>(user)];
  return std::binary_search(pos.begin(), pos.end(), item);
}

std::vector<std::int32_t> InteractionTable::unobserved_items(
    std::int32_t user) const {
  const auto& pos = user_positives_[static_cast<std::size_t>(user)];
  std::vector<std::int32_t> out;
  out.reserve(static_cast<std::size_t>(num_items_) - pos.size());
  std::size_t p = 0;
  for (std::int32_t item = 0; item < num_items_; ++item) {
    if (p < pos.size() && pos[p] == item) {
      ++p;
      continue;
    }
    out.push_back(item);
  }
  return out;
}

std::vector<std::int64_t> InteractionTable::item_counts() const {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_items_), 0);
  for (const Interaction& it : interactions_) {
    ++counts[static_cast<std::size_t>(it.item)];
  }
  return counts;
}

std::uint64_t InteractionTable::content_hash() const {
  Fnv1a h;
  h.update_u64(static_cast<std::uint64_t>(num_users_));
  h.update_u64(static_cast<std::uint64_t>(num_items_));
  for (const Interaction& it : interactions_) {
    h.update_u64(static_cast<std::uint64_t>(it.user));
    h.update_u64(static_cast<std::uint64_t>(it.item));
  }
  return h.digest();
}

std::vector<RawPair> load_interactions(const std::string& path,
                                       const TextFormat& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ratings file: " + path);

  const int max_col = std::max(format.user_column, format.item_column);
  std::vector<RawPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line, format.separator);
    if (static_cast<int>(fields.size()) <= max_col ||
        fields[static_cast<std::size_t>(format.user_column)].empty() ||
        fields[static_cast<std::size_t>(format.item_column)].empty()) {
      throw DataError("malformed record at " + path + ":" +
                      std::to_string(line_no) + ": \"" + line + "\"");
    }
    pairs.push_back({fields[static_cast<std::size_t>(format.user_column)],
                     fields[static_cast<std::size_t>(format.item_column)]});
  }
  if (in.bad()) throw DataError("read failure on " + path);
  return pairs;
}

std::vector<RawAttribute> load_attributes(const std::string& path,
                                          const std::string& separator) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open attribute file: " + path);

  std::vector<RawAttribute> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line, separator);
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
      throw DataError("malformed attribute record at " + path + ":" +
                      std::to_string(line_no) + ": \"" + line + "\"");
    }
    records.push_back({fields[0], fields[1]});
  }
  if (in.bad()) throw DataError("read failure on " + path);
  return records;
}

ReindexResult reindex(const std::vector<RawPair>& pairs,
                      const std::vector<RawAttribute>& attributes) {
  ReindexResult r;
  std::unordered_map<std::string, std::int32_t> item_index;
  std::unordered_map<std::string, std::int32_t> label_index;

  for (const RawAttribute& a : attributes) {
    auto [it, inserted] = item_index.try_emplace(
        a.item, static_cast<std::int32_t>(r.item_ids.size()));
    auto [lit, label_inserted] = label_index.try_emplace(
        a.label, static_cast<std::int32_t>(r.groups.group_labels.size()));
    if (label_inserted) r.groups.group_labels.push_back(a.label);
    if (inserted) {
      r.item_ids.push_back(a.item);
      r.groups.item_group.push_back(lit->second);
    } else if (r.groups.item_group[static_cast<std::size_t>(it->second)] !=
               lit->second) {
      throw DataError("item \"" + a.item + "\" has conflicting group labels");
    }
  }

  std::unordered_map<std::string, std::int32_t> user_index;
  std::vector<Interaction> indexed;
  indexed.reserve(pairs.size());
  for (const RawPair& p : pairs) {
    auto item_it = item_index.find(p.item);
    if (item_it == item_index.end()) {
      throw DataError("interacted item \"" + p.item +
                      "\" has no attribute record");
    }
    auto [uit, _] = user_index.try_emplace(
        p.user, static_cast<std::int32_t>(r.user_ids.size()));
    if (uit->second == static_cast<std::int32_t>(r.user_ids.size())) {
      r.user_ids.push_back(p.user);
    }
    indexed.push_back({uit->second, item_it->second});
  }

  r.table = InteractionTable::from_pairs(
      std::move(indexed), static_cast<std::int32_t>(r.user_ids.size()),
      static_cast<std::int32_t>(r.item_ids.size()));
  return r;
}

std::array<std::size_t, 3> split_sizes(std::size_t n) {
  const std::size_t val = n / 5;
  const std::size_t test = n / 5;
  return {n - val - test, val, test};
}

DataSplit split(const InteractionTable& table, std::uint64_t seed) {
  if (table.size() == 0) throw DataError("cannot split an empty table");

  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  const auto sizes = split_sizes(table.size());
  auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<Interaction> part;
    part.reserve(count);
    for (std::size_t k = begin; k < begin + count; ++k) {
      part.push_back(table.interactions()[order[k]]);
    }
    return InteractionTable::from_pairs(std::move(part), table.num_users(),
                                        table.num_items());
  };

  DataSplit s;
  s.seed = seed;
  s.train = take(0, sizes[0]);
  s.validation = take(sizes[0], sizes[1]);
  s.test = take(sizes[0] + sizes[1], sizes[2]);
  return s;
}

std::vector<GroupStats> group_stats(const InteractionTable& table,
                                    const GroupMap& groups) {
  std::vector<GroupStats> stats(
      static_cast<std::size_t>(groups.group_count()));
  for (std::int32_t g : groups.item_group) {
    ++stats[static_cast<std::size_t>(g)].item_count;
  }
  for (const Interaction& it : table.interactions()) {
    ++stats[static_cast<std::size_t>(groups.item_group[static_cast<std::size_t>(
          it.item)])].feedback_count;
  }
  for (GroupStats& s : stats) {
    s.feedback_per_item =
        s.item_count > 0
            ? static_cast<double>(s.feedback_count) / static_cast<double>(s.item_count)
            : 0.0;
  }
  return stats;
}

}  // namespace fairneg
