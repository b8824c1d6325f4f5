#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fairneg/interactions.hpp"
#include "fairneg/model.hpp"

namespace fairneg {

// Per-user top-k recommendations. Masked items (the user's positives in any
// mask table) never appear; scores are non-increasing with ties broken by
// ascending item index. May be shorter than k when the unmasked catalog is.
struct RankedList {
  std::int32_t user = 0;
  std::vector<std::int32_t> items;
  std::vector<double> scores;
};

enum class GroupRecallAggregation { Micro, Macro };

GroupRecallAggregation aggregation_from_name(const std::string& name);
std::string aggregation_name(GroupRecallAggregation agg);

// Lists for every user with at least one positive in `eval_table`.
std::vector<RankedList> topk_recommend(
    const EmbeddingView& view, const InteractionTable& eval_table,
    const std::vector<const InteractionTable*>& masks, int k);

// Same protocol over an explicit score matrix (num_users x num_items).
std::vector<RankedList> topk_recommend(
    const Eigen::MatrixXd& scores, const InteractionTable& eval_table,
    const std::vector<const InteractionTable*>& masks, int k);

// Overall utility metrics: mean over evaluated users.
double recall_at_k(const std::vector<RankedList>& lists,
                   const InteractionTable& eval_table);
double precision_at_k(const std::vector<RankedList>& lists,
                      const InteractionTable& eval_table, int k);
double ndcg_at_k(const std::vector<RankedList>& lists,
                 const InteractionTable& eval_table, int k);
// Harmonic mean of the overall P@k and R@k.
double f1_at_k(const std::vector<RankedList>& lists,
               const InteractionTable& eval_table, int k);
// Pooled (micro) recall: total hits / total eval positives.
double pooled_recall_at_k(const std::vector<RankedList>& lists,
                          const InteractionTable& eval_table);

struct GroupRecall {
  Eigen::VectorXd recall;       // NaN where undefined
  std::vector<char> defined;    // group has >= 1 eval positive
};

GroupRecall group_recall_at_k(const std::vector<RankedList>& lists,
                              const InteractionTable& eval_table,
                              const GroupMap& groups,
                              GroupRecallAggregation aggregation);

// Relative standard deviation (population std / mean) over the defined
// group recalls. Disp needs >= 2 defined groups and a nonzero mean.
double recall_disp(const std::vector<double>& group_recalls);
double recall_min(const std::vector<double>& group_recalls);
double recall_avg(const std::vector<double>& group_recalls);

struct MetricReport {
  int k = 0;
  int evaluated_users = 0;
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
  double f1 = 0.0;
  double pooled_recall = 0.0;
  GroupRecall group;
  double disp = std::numeric_limits<double>::quiet_NaN();
  double min = std::numeric_limits<double>::quiet_NaN();
  double avg = std::numeric_limits<double>::quiet_NaN();
  bool disp_defined = false;

  static std::string csv_header(int groups);
  std::string csv_row() const;
  std::string to_json() const;
};

MetricReport compute_metrics(const std::vector<RankedList>& lists,
                             const InteractionTable& eval_table,
                             const GroupMap& groups, int k,
                             GroupRecallAggregation aggregation =
                                 GroupRecallAggregation::Micro);

}  // namespace fairneg
