#include "fairneg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "fairneg/common.hpp"

namespace fairneg {

using json = nlohmann::json;

GroupRecallAggregation aggregation_from_name(const std::string& name) {
  if (name == "micro") return GroupRecallAggregation::Micro;
  if (name == "macro") return GroupRecallAggregation::Macro;
  throw ConfigError("unknown group_recall_aggregation: \"" + name + "\"");
}

std::string aggregation_name(GroupRecallAggregation agg) {
  return agg == GroupRecallAggregation::Micro ? "micro" : "macro";
}

namespace {

RankedList topk_for_user(std::int32_t user, const Eigen::VectorXd& scores,
                         const std::vector<const InteractionTable*>& masks,
                         int k, std::vector<char>& masked_scratch) {
  const std::int32_t n = static_cast<std::int32_t>(scores.size());
  std::fill(masked_scratch.begin(), masked_scratch.end(), 0);
  for (const InteractionTable* m : masks) {
    for (std::int32_t item : m->positives(user)) {
      masked_scratch[static_cast<std::size_t>(item)] = 1;
    }
  }
  std::vector<std::int32_t> order;
  order.reserve(static_cast<std::size_t>(n));
  for (std::int32_t i = 0; i < n; ++i) {
    if (!masked_scratch[static_cast<std::size_t>(i)]) order.push_back(i);
  }
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k),
                                               order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk),
                    order.end(), [&](std::int32_t a, std::int32_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(kk);

  RankedList list;
  list.user = user;
  list.items = std::move(order);
  list.scores.reserve(kk);
  for (std::int32_t item : list.items) list.scores.push_back(scores[item]);
  return list;
}

std::vector<std::int32_t> evaluated_users(const InteractionTable& eval_table) {
  std::vector<std::int32_t> users;
  for (std::int32_t u = 0; u < eval_table.num_users(); ++u) {
    if (!eval_table.positives(u).empty()) users.push_back(u);
  }
  return users;
}

}  // namespace

std::vector<RankedList> topk_recommend(
    const EmbeddingView& view, const InteractionTable& eval_table,
    const std::vector<const InteractionTable*>& masks, int k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  std::vector<RankedList> lists;
  std::vector<char> scratch(static_cast<std::size_t>(eval_table.num_items()), 0);
  for (std::int32_t u : evaluated_users(eval_table)) {
    lists.push_back(topk_for_user(u, view.score_all(u), masks, k, scratch));
  }
  return lists;
}

std::vector<RankedList> topk_recommend(
    const Eigen::MatrixXd& scores, const InteractionTable& eval_table,
    const std::vector<const InteractionTable*>& masks, int k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  std::vector<RankedList> lists;
  std::vector<char> scratch(static_cast<std::size_t>(eval_table.num_items()), 0);
  for (std::int32_t u : evaluated_users(eval_table)) {
    lists.push_back(
        topk_for_user(u, scores.row(u).transpose(), masks, k, scratch));
  }
  return lists;
}

double recall_at_k(const std::vector<RankedList>& lists,
                   const InteractionTable& eval_table) {
  if (lists.empty()) return 0.0;
  double total = 0.0;
  for (const RankedList& l : lists) {
    const auto& pos = eval_table.positives(l.user);
    if (pos.empty()) continue;
    std::size_t hits = 0;
    for (std::int32_t item : l.items) {
      if (eval_table.is_positive(l.user, item)) ++hits;
    }
    total += static_cast<double>(hits) / static_cast<double>(pos.size());
  }
  return total / static_cast<double>(lists.size());
}

double precision_at_k(const std::vector<RankedList>& lists,
                      const InteractionTable& eval_table, int k) {
  if (lists.empty()) return 0.0;
  double total = 0.0;
  for (const RankedList& l : lists) {
    std::size_t hits = 0;
    for (std::int32_t item : l.items) {
      if (eval_table.is_positive(l.user, item)) ++hits;
    }
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(lists.size());
}

double ndcg_at_k(const std::vector<RankedList>& lists,
                 const InteractionTable& eval_table, int k) {
  if (lists.empty()) return 0.0;
  double total = 0.0;
  for (const RankedList& l : lists) {
    const auto& pos = eval_table.positives(l.user);
    if (pos.empty()) continue;
    double dcg = 0.0;
    for (std::size_t r = 0; r < l.items.size(); ++r) {
      if (eval_table.is_positive(l.user, l.items[r])) {
        dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
      }
    }
    const std::size_t ideal =
        std::min<std::size_t>(static_cast<std::size_t>(k), pos.size());
    double idcg = 0.0;
    for (std::size_t r = 0; r < ideal; ++r) {
      idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
    total += dcg / idcg;
  }
  return total / static_cast<double>(lists.size());
}

double f1_at_k(const std::vector<RankedList>& lists,
               const InteractionTable& eval_table, int k) {
  const double p = precision_at_k(lists, eval_table, k);
  const double r = recall_at_k(lists, eval_table);
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

double pooled_recall_at_k(const std::vector<RankedList>& lists,
                          const InteractionTable& eval_table) {
  std::int64_t hits = 0, total = 0;
  for (const RankedList& l : lists) {
    total += static_cast<std::int64_t>(eval_table.positives(l.user).size());
    for (std::int32_t item : l.items) {
      if (eval_table.is_positive(l.user, item)) ++hits;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(hits) / static_cast<double>(total);
}

GroupRecall group_recall_at_k(const std::vector<RankedList>& lists,
                              const InteractionTable& eval_table,
                              const GroupMap& groups,
                              GroupRecallAggregation aggregation) {
  const int a = groups.group_count();
  GroupRecall out;
  out.recall = Eigen::VectorXd::Constant(a, std::numeric_limits<double>::quiet_NaN());
  out.defined.assign(static_cast<std::size_t>(a), 0);

  if (aggregation == GroupRecallAggregation::Micro) {
    Eigen::VectorXd hits = Eigen::VectorXd::Zero(a);
    Eigen::VectorXd totals = Eigen::VectorXd::Zero(a);
    for (const RankedList& l : lists) {
      for (std::int32_t item : eval_table.positives(l.user)) {
        totals[groups.item_group[static_cast<std::size_t>(item)]] += 1.0;
      }
      for (std::int32_t item : l.items) {
        if (eval_table.is_positive(l.user, item)) {
          hits[groups.item_group[static_cast<std::size_t>(item)]] += 1.0;
        }
      }
    }
    for (int g = 0; g < a; ++g) {
      if (totals[g] > 0.0) {
        out.recall[g] = hits[g] / totals[g];
        out.defined[static_cast<std::size_t>(g)] = 1;
      }
    }
    return out;
  }

  // Macro: mean over users that have eval positives in the group.
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(a);
  Eigen::VectorXd users = Eigen::VectorXd::Zero(a);
  std::vector<double> user_hits(static_cast<std::size_t>(a));
  std::vector<double> user_totals(static_cast<std::size_t>(a));
  for (const RankedList& l : lists) {
    std::fill(user_hits.begin(), user_hits.end(), 0.0);
    std::fill(user_totals.begin(), user_totals.end(), 0.0);
    for (std::int32_t item : eval_table.positives(l.user)) {
      user_totals[static_cast<std::size_t>(
          groups.item_group[static_cast<std::size_t>(item)])] += 1.0;
    }
    for (std::int32_t item : l.items) {
      if (eval_table.is_positive(l.user, item)) {
        user_hits[static_cast<std::size_t>(
            groups.item_group[static_cast<std::size_t>(item)])] += 1.0;
      }
    }
    for (int g = 0; g < a; ++g) {
      if (user_totals[static_cast<std::size_t>(g)] > 0.0) {
        sum[g] += user_hits[static_cast<std::size_t>(g)] /
                  user_totals[static_cast<std::size_t>(g)];
        users[g] += 1.0;
      }
    }
  }
  for (int g = 0; g < a; ++g) {
    if (users[g] > 0.0) {
      out.recall[g] = sum[g] / users[g];
      out.defined[static_cast<std::size_t>(g)] = 1;
    }
  }
  return out;
}

double recall_disp(const std::vector<double>& group_recalls) {
  if (group_recalls.size() < 2) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double n = static_cast<double>(group_recalls.size());
  double mean = 0.0;
  for (double r : group_recalls) mean += r;
  mean /= n;
  if (mean == 0.0) return std::numeric_limits<double>::quiet_NaN();
  double var = 0.0;
  for (double r : group_recalls) var += (r - mean) * (r - mean);
  var /= n;  // population std: the groups are the whole population
  return std::sqrt(var) / mean;
}

double recall_min(const std::vector<double>& group_recalls) {
  if (group_recalls.empty()) return std::numeric_limits<double>::quiet_NaN();
  return *std::min_element(group_recalls.begin(), group_recalls.end());
}

double recall_avg(const std::vector<double>& group_recalls) {
  if (group_recalls.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double r : group_recalls) s += r;
  return s / static_cast<double>(group_recalls.size());
}

MetricReport compute_metrics(const std::vector<RankedList>& lists,
                             const InteractionTable& eval_table,
                             const GroupMap& groups, int k,
                             GroupRecallAggregation aggregation) {
  MetricReport r;
  r.k = k;
  r.evaluated_users = static_cast<int>(lists.size());
  r.precision = precision_at_k(lists, eval_table, k);
  r.recall = recall_at_k(lists, eval_table);
  r.ndcg = ndcg_at_k(lists, eval_table, k);
  r.f1 = f1_at_k(lists, eval_table, k);
  r.pooled_recall = pooled_recall_at_k(lists, eval_table);
  r.group = group_recall_at_k(lists, eval_table, groups, aggregation);

  std::vector<double> defined;
  for (int g = 0; g < groups.group_count(); ++g) {
    if (r.group.defined[static_cast<std::size_t>(g)]) {
      defined.push_back(r.group.recall[g]);
    }
  }
  r.min = recall_min(defined);
  r.avg = recall_avg(defined);
  r.disp = recall_disp(defined);
  r.disp_defined = std::isfinite(r.disp);
  return r;
}

std::string MetricReport::csv_header(int groups) {
  std::ostringstream out;
  out << "k,evaluated_users,recall_disp,recall_min,recall_avg,ndcg,precision,"
         "recall,f1,pooled_recall";
  for (int g = 0; g < groups; ++g) out << ",group_recall_" << g;
  return out.str();
}

std::string MetricReport::csv_row() const {
  std::ostringstream out;
  out << k << ',' << evaluated_users << ',' << format_double(disp) << ','
      << format_double(min) << ',' << format_double(avg) << ','
      << format_double(ndcg) << ',' << format_double(precision) << ','
      << format_double(recall) << ',' << format_double(f1) << ','
      << format_double(pooled_recall);
  for (Eigen::Index g = 0; g < group.recall.size(); ++g) {
    out << ',' << format_double(group.recall[g]);
  }
  return out.str();
}

std::string MetricReport::to_json() const {
  json j;
  j["k"] = k;
  j["evaluated_users"] = evaluated_users;
  j["recall_disp"] = disp_defined ? json(disp) : json(nullptr);
  j["recall_min"] = std::isfinite(min) ? json(min) : json(nullptr);
  j["recall_avg"] = std::isfinite(avg) ? json(avg) : json(nullptr);
  j["ndcg"] = ndcg;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["pooled_recall"] = pooled_recall;
  json gr = json::array();
  for (Eigen::Index g = 0; g < group.recall.size(); ++g) {
    if (group.defined[static_cast<std::size_t>(g)]) {
      gr.push_back(group.recall[g]);
    } else {
      gr.push_back(nullptr);
    }
  }
  j["group_recall"] = std::move(gr);
  return j.dump(1);
}

}  // namespace fairneg
