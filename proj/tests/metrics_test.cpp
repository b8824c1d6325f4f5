#include <doctest.h>

#include <cmath>

#include "fairneg/metrics.hpp"
#include "fairneg/rng.hpp"
#include "fairneg/synth.hpp"

using namespace fairneg;

namespace {

InteractionTable table_from(std::vector<Interaction> pairs, std::int32_t nu,
                            std::int32_t ni) {
  return InteractionTable::from_pairs(std::move(pairs), nu, ni);
}

}  // namespace

TEST_CASE("topk masks positives and breaks ties by index") {
  // Catalog of 3 items, scores (9, 5, 7); item 0 is a train positive.
  Eigen::MatrixXd scores(1, 3);
  scores << 9.0, 5.0, 7.0;
  const InteractionTable train = table_from({{0, 0}}, 1, 3);
  const InteractionTable test = table_from({{0, 1}}, 1, 3);
  const auto lists = topk_recommend(scores, test, {&train}, 2);
  REQUIRE(lists.size() == 1);
  CHECK(lists[0].items == std::vector<std::int32_t>{2, 1});

  Eigen::MatrixXd flat(1, 3);
  flat << 4.0, 4.0, 4.0;
  const auto tied = topk_recommend(flat, test, {&train}, 2);
  CHECK(tied[0].items == std::vector<std::int32_t>{1, 2});
}

TEST_CASE("topk truncates when the unmasked catalog is small") {
  Eigen::MatrixXd scores(1, 3);
  scores << 1.0, 2.0, 3.0;
  const InteractionTable train = table_from({{0, 0}, {0, 1}}, 1, 3);
  const InteractionTable test = table_from({{0, 2}}, 1, 3);
  const auto lists = topk_recommend(scores, test, {&train}, 5);
  REQUIRE(lists.size() == 1);
  CHECK(lists[0].items == std::vector<std::int32_t>{2});
}

TEST_CASE("users without eval positives are excluded") {
  Eigen::MatrixXd scores(2, 3);
  scores.setOnes();
  const InteractionTable test = table_from({{1, 0}}, 2, 3);
  const auto lists = topk_recommend(scores, test, {}, 2);
  REQUIRE(lists.size() == 1);
  CHECK(lists[0].user == 1);
}

TEST_CASE("utility metric hand values") {
  SUBCASE("single test positive ranked first at k 20") {
    Eigen::MatrixXd scores(1, 30);
    for (int i = 0; i < 30; ++i) scores(0, i) = 30.0 - i;
    const InteractionTable test = table_from({{0, 0}}, 1, 30);
    const auto lists = topk_recommend(scores, test, {}, 20);
    CHECK(recall_at_k(lists, test) == doctest::Approx(1.0));
    CHECK(ndcg_at_k(lists, test, 20) == doctest::Approx(1.0));
    CHECK(precision_at_k(lists, test, 20) == doctest::Approx(0.05));
  }
  SUBCASE("no hits anywhere gives zeros") {
    Eigen::MatrixXd scores(1, 5);
    scores << 5, 4, 3, 2, 1;
    const InteractionTable test = table_from({{0, 4}}, 1, 5);
    const auto lists = topk_recommend(scores, test, {}, 2);
    CHECK(recall_at_k(lists, test) == 0.0);
    CHECK(precision_at_k(lists, test, 2) == 0.0);
    CHECK(ndcg_at_k(lists, test, 2) == 0.0);
    CHECK(f1_at_k(lists, test, 2) == 0.0);
  }
  SUBCASE("hits at ranks 1 and 3 of two relevant, k 3") {
    Eigen::MatrixXd scores(1, 6);
    scores << 9, 8, 7, 1, 1, 1;  // top-3 = items 0,1,2
    const InteractionTable test = table_from({{0, 0}, {0, 2}}, 1, 6);
    const auto lists = topk_recommend(scores, test, {}, 3);
    CHECK(recall_at_k(lists, test) == doctest::Approx(1.0));
    const double idcg = 1.0 + 1.0 / std::log2(3.0);
    const double dcg = 1.0 + 1.0 / std::log2(4.0);
    CHECK(ndcg_at_k(lists, test, 3) ==
          doctest::Approx(dcg / idcg).epsilon(1e-9));
    CHECK(ndcg_at_k(lists, test, 3) == doctest::Approx(0.9197207).epsilon(1e-6));
  }
  SUBCASE("f1 is the harmonic mean of overall P and R") {
    Eigen::MatrixXd scores(1, 5);
    scores << 5, 4, 3, 2, 1;
    const InteractionTable test = table_from({{0, 0}}, 1, 5);
    const auto lists = topk_recommend(scores, test, {}, 2);
    const double p = precision_at_k(lists, test, 2);  // 0.5
    const double r = recall_at_k(lists, test);        // 1.0
    CHECK(f1_at_k(lists, test, 2) ==
          doctest::Approx(2.0 * p * r / (p + r)));
  }
}

TEST_CASE("group recall micro aggregation") {
  GroupMap groups;
  groups.group_labels = {"a", "b"};
  groups.item_group = {0, 0, 1, 1, 1, 1};

  SUBCASE("group with 4 test positives and 1 hit is 0.25") {
    // User 0 and 1 each hold two group-b test positives; only item 2 for
    // user 0 makes the top-2.
    Eigen::MatrixXd scores(2, 6);
    scores.row(0) << 9, 8, 7, 0, 0, 0;  // top2: 0,1 -> hit item none of b...
    scores.row(1) << 0, 0, 0, 0, 8, 9;
    const InteractionTable test =
        table_from({{0, 2}, {0, 3}, {1, 4}, {1, 5}}, 2, 6);
    const auto lists = topk_recommend(scores, test, {}, 2);
    const GroupRecall gr =
        group_recall_at_k(lists, test, groups, GroupRecallAggregation::Micro);
    CHECK_FALSE(gr.defined[0]);  // group a has no test positives
    CHECK(gr.defined[1]);
    CHECK(gr.recall[1] == doctest::Approx(0.5));  // user1 hits both, user0 none

    scores.row(1) << 0, 0, 0, 0, 0, 9;  // now only one hit total
    const auto lists2 = topk_recommend(scores, test, {}, 1);
    const GroupRecall gr2 =
        group_recall_at_k(lists2, test, groups, GroupRecallAggregation::Micro);
    CHECK(gr2.recall[1] == doctest::Approx(0.25));
  }
  SUBCASE("perfect hits give recall 1") {
    Eigen::MatrixXd scores(1, 6);
    scores << 0, 0, 9, 8, 7, 6;
    const InteractionTable test = table_from({{0, 2}, {0, 3}}, 1, 6);
    const auto lists = topk_recommend(scores, test, {}, 4);
    const GroupRecall gr =
        group_recall_at_k(lists, test, groups, GroupRecallAggregation::Micro);
    CHECK(gr.recall[1] == doctest::Approx(1.0));
  }
  SUBCASE("single-user dataset equals the per-group hit fraction") {
    Eigen::MatrixXd scores(1, 6);
    scores << 9, 0, 8, 0, 0, 7;
    const InteractionTable test =
        table_from({{0, 0}, {0, 1}, {0, 2}, {0, 3}}, 1, 6);
    const auto lists = topk_recommend(scores, test, {}, 2);  // items 0, 2
    const GroupRecall gr =
        group_recall_at_k(lists, test, groups, GroupRecallAggregation::Micro);
    CHECK(gr.recall[0] == doctest::Approx(0.5));
    CHECK(gr.recall[1] == doctest::Approx(0.5));
  }
}

TEST_CASE("macro aggregation averages per-user group recalls") {
  GroupMap groups;
  groups.group_labels = {"a"};
  groups.item_group = {0, 0};
  // user0: 2 positives, 1 hit (0.5); user1: 1 positive, 1 hit (1.0).
  Eigen::MatrixXd scores(2, 2);
  scores.row(0) << 9, 0;
  scores.row(1) << 9, 0;
  const InteractionTable test = table_from({{0, 0}, {0, 1}, {1, 0}}, 2, 2);
  const auto lists = topk_recommend(scores, test, {}, 1);
  const GroupRecall micro =
      group_recall_at_k(lists, test, groups, GroupRecallAggregation::Micro);
  const GroupRecall macro =
      group_recall_at_k(lists, test, groups, GroupRecallAggregation::Macro);
  CHECK(micro.recall[0] == doctest::Approx(2.0 / 3.0));
  CHECK(macro.recall[0] == doctest::Approx(0.75));
}

TEST_CASE("disp min avg hand values and properties") {
  CHECK(recall_disp({0.4, 0.4}) == doctest::Approx(0.0));
  CHECK(recall_min({0.4, 0.4}) == doctest::Approx(0.4));
  CHECK(recall_avg({0.4, 0.4}) == doctest::Approx(0.4));

  // std 0.1, mean 0.3.
  CHECK(recall_disp({0.2, 0.4}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  SUBCASE("A=2 closed form |a-b|/(a+b)") {
    Rng rng(41);
    for (int trial = 0; trial < 1000; ++trial) {
      const double a = rng.uniform_real();
      const double b = rng.uniform_real();
      if (a + b == 0.0) continue;
      CHECK(recall_disp({a, b}) ==
            doctest::Approx(std::abs(a - b) / (a + b)).epsilon(1e-12));
    }
  }
  SUBCASE("scale invariance") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> r = {rng.uniform_real() + 0.01,
                               rng.uniform_real() + 0.01,
                               rng.uniform_real() + 0.01};
      std::vector<double> scaled = r;
      const double c = 0.3 + 2.0 * rng.uniform_real();
      for (double& x : scaled) x *= c;
      CHECK(recall_disp(scaled) == doctest::Approx(recall_disp(r)).epsilon(1e-10));
    }
  }
  SUBCASE("undefined cases") {
    CHECK(std::isnan(recall_disp({0.5})));          // needs >= 2 groups
    CHECK(std::isnan(recall_disp({0.0, 0.0})));     // zero mean
  }
}

TEST_CASE("rank-only dependence under monotone transforms") {
  SynthSpec spec;
  spec.users = 12;
  spec.items = 15;
  spec.groups = 2;
  spec.interactions = 60;
  spec.seed = 43;
  const SynthData d = generate_synthetic(spec);
  const DataSplit s = split(d.table, 5);

  Rng rng(44);
  Eigen::MatrixXd scores(spec.users, spec.items);
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      scores(r, c) = rng.uniform(-2.0, 2.0);
    }
  }
  Eigen::MatrixXd transformed =
      (scores.array() * 0.5).exp() * 3.0;  // strictly monotone, tie-preserving

  const auto lists = topk_recommend(scores, s.test, {&s.train, &s.validation}, 5);
  const auto lists2 =
      topk_recommend(transformed, s.test, {&s.train, &s.validation}, 5);
  REQUIRE(lists.size() == lists2.size());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    CHECK(lists[i].items == lists2[i].items);
  }
  const MetricReport a = compute_metrics(lists, s.test, d.groups, 5);
  const MetricReport b = compute_metrics(lists2, s.test, d.groups, 5);
  CHECK(a.recall == b.recall);
  CHECK(a.ndcg == b.ndcg);
  CHECK(a.disp == b.disp);
}

TEST_CASE("micro consistency: pooled recall equals feedback-weighted groups") {
  Rng rng(45);
  for (int trial = 0; trial < 50; ++trial) {
    SynthSpec spec;
    spec.users = 8 + static_cast<int>(rng.uniform_index(10));
    spec.items = 10 + static_cast<int>(rng.uniform_index(10));
    spec.groups = 2 + static_cast<int>(rng.uniform_index(2));
    spec.interactions = spec.users * 3;
    spec.seed = 100 + static_cast<std::uint64_t>(trial);
    const SynthData d = generate_synthetic(spec);
    const DataSplit s = split(d.table, spec.seed);

    Eigen::MatrixXd scores(spec.users, spec.items);
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      for (Eigen::Index c = 0; c < scores.cols(); ++c) {
        scores(r, c) = rng.uniform(-1.0, 1.0);
      }
    }
    const auto lists = topk_recommend(scores, s.test, {&s.train}, 5);
    if (lists.empty()) continue;
    const GroupRecall gr =
        group_recall_at_k(lists, s.test, d.groups, GroupRecallAggregation::Micro);

    // Feedback totals per group over the evaluated users.
    Eigen::VectorXd totals = Eigen::VectorXd::Zero(d.groups.group_count());
    for (const RankedList& l : lists) {
      for (std::int32_t item : s.test.positives(l.user)) {
        totals[d.groups.item_group[static_cast<std::size_t>(item)]] += 1.0;
      }
    }
    double weighted = 0.0;
    for (int g = 0; g < d.groups.group_count(); ++g) {
      if (gr.defined[static_cast<std::size_t>(g)]) {
        weighted += totals[g] / totals.sum() * gr.recall[g];
      }
    }
    CHECK(std::abs(pooled_recall_at_k(lists, s.test) - weighted) <= 1e-12);
  }
}

TEST_CASE("metric report flags undefined groups and serializes") {
  GroupMap groups;
  groups.group_labels = {"a", "b"};
  groups.item_group = {0, 1};
  Eigen::MatrixXd scores(1, 2);
  scores << 1.0, 2.0;
  const InteractionTable test = table_from({{0, 0}}, 1, 2);  // group b empty
  const auto lists = topk_recommend(scores, test, {}, 2);
  const MetricReport r = compute_metrics(lists, test, groups, 2);
  CHECK(r.group.defined[0]);
  CHECK_FALSE(r.group.defined[1]);
  CHECK_FALSE(r.disp_defined);  // needs two defined groups
  CHECK(r.min == doctest::Approx(1.0));
  CHECK(r.avg == doctest::Approx(1.0));

  const std::string csv = r.csv_row();
  CHECK(csv.find("nan") != std::string::npos);
  const std::string js = r.to_json();
  CHECK(js.find("\"recall_disp\": null") != std::string::npos);
  CHECK(MetricReport::csv_header(2).find("group_recall_1") != std::string::npos);
}
