#include <doctest.h>

#include <cmath>

#include "fairneg/fairness.hpp"
#include "fairneg/rng.hpp"

using namespace fairneg;

namespace {

GroupMap two_groups(int items_per_group) {
  GroupMap g;
  g.group_labels = {"a", "b"};
  for (int k = 0; k < items_per_group; ++k) g.item_group.push_back(0);
  for (int k = 0; k < items_per_group; ++k) g.item_group.push_back(1);
  return g;
}

}  // namespace

TEST_CASE("gbce losses") {
  ModelConfig cfg;
  cfg.latent_dim = 1;
  const GroupMap groups = two_groups(2);

  SUBCASE("all scores zero gives ln 2 per group") {
    EmbeddingModel m = EmbeddingModel::init_xavier(2, 4, cfg, 1);
    m.user_factors.setZero();
    const InteractionTable t =
        InteractionTable::from_pairs({{0, 0}, {0, 2}, {1, 1}, {1, 3}}, 2, 4);
    const GroupLossVector l = gbce_losses(m.base_view(), t, groups, 1);
    CHECK(l.losses[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(l.losses[1] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }

  SUBCASE("a saturated positive drives its group loss to zero") {
    EmbeddingModel m = EmbeddingModel::init_xavier(1, 4, cfg, 1);
    m.user_factors << 1.0;
    m.item_factors << 50.0, 0.0, 50.0, 0.0;
    const InteractionTable t = InteractionTable::from_pairs({{0, 0}, {0, 2}}, 1, 4);
    const GroupLossVector l = gbce_losses(m.base_view(), t, groups, 1);
    CHECK(l.losses[0] < 1e-12);
  }

  SUBCASE("two positives with scores (0, ln 3)") {
    EmbeddingModel m = EmbeddingModel::init_xavier(1, 4, cfg, 1);
    m.user_factors << 1.0;
    m.item_factors << 0.0, std::log(3.0), 1.0, 1.0;
    GroupMap g;
    g.group_labels = {"a", "b"};
    g.item_group = {0, 0, 1, 1};
    // Group b has no train positives.
    const InteractionTable t = InteractionTable::from_pairs({{0, 0}, {0, 1}}, 1, 4);
    CHECK_THROWS_AS(gbce_losses(m.base_view(), t, g, 1), DataError);

    const InteractionTable t2 =
        InteractionTable::from_pairs({{0, 0}, {0, 1}, {0, 2}}, 1, 4);
    const GroupLossVector l = gbce_losses(m.base_view(), t2, g, 1);
    // -(ln 0.5 + ln 0.75) / 2
    CHECK(l.losses[0] == doctest::Approx(0.4904146265).epsilon(1e-9));
  }

  SUBCASE("subsampled estimate matches the exact value for singleton groups") {
    EmbeddingModel m = EmbeddingModel::init_xavier(40, 4, cfg, 9);
    std::vector<Interaction> pairs;
    for (std::int32_t u = 0; u < 40; ++u) pairs.push_back({u, u % 2});
    pairs.push_back({0, 2});  // the single group-b positive
    const InteractionTable t = InteractionTable::from_pairs(std::move(pairs), 40, 4);
    GbceOptions opt;
    opt.full_limit = 10;
    opt.subsample = 20;
    opt.seed = 77;
    const GroupLossVector sub = gbce_losses(m.base_view(), t, groups, 1, opt);
    const GroupLossVector full = gbce_losses(m.base_view(), t, groups, 1);
    CHECK(sub.losses.allFinite());
    // Group b has one positive, so subsample or fallback are both exact.
    CHECK(sub.losses[1] == doctest::Approx(full.losses[1]).epsilon(1e-12));
    // Same seed, same estimate.
    const GroupLossVector sub2 = gbce_losses(m.base_view(), t, groups, 1, opt);
    CHECK(sub.losses[0] == sub2.losses[0]);
  }
}

TEST_CASE("group gradients are mean deviations") {
  GroupLossVector l;
  l.losses = Eigen::Vector2d(0.8, 0.6);
  Eigen::VectorXd g = group_gradients(l);
  CHECK(g[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(-0.1).epsilon(1e-12));

  l.losses = Eigen::Vector3d(0.9, 0.6, 0.6);
  g = group_gradients(l);
  CHECK(g[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(g[2] == doctest::Approx(-0.1).epsilon(1e-12));

  l.losses = Eigen::Vector2d(0.5, 0.5);
  CHECK(group_gradients(l).cwiseAbs().maxCoeff() == 0.0);

  // Zero-sum property on random loss vectors.
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const int a = 2 + static_cast<int>(rng.uniform_index(6));
    GroupLossVector v;
    v.losses.resize(a);
    for (int k = 0; k < a; ++k) v.losses[k] = rng.uniform(0.0, 2.0);
    CHECK(std::abs(group_gradients(v).sum()) <= 1e-12);
  }
}

TEST_CASE("momentum update") {
  SUBCASE("zero gradient and zero bank is a fixed point") {
    MomentumBank bank = MomentumBank::zeros(2, 0.1, 0.1);
    GroupDistribution p{Eigen::Vector2d(0.5, 0.5), 1e-3};
    momentum_update(bank, p, Eigen::Vector2d(0.0, 0.0));
    CHECK(p.p[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(bank.v.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("one-step hand trace, gamma 0.1 alpha 0.1") {
    MomentumBank bank = MomentumBank::zeros(2, 0.1, 0.1);
    GroupDistribution p{Eigen::Vector2d(0.5, 0.5), 1e-3};
    momentum_update(bank, p, Eigen::Vector2d(0.1, -0.1));
    CHECK(std::abs(bank.v[0] - 0.01) <= 1e-12);
    CHECK(std::abs(bank.v[1] + 0.01) <= 1e-12);
    CHECK(std::abs(p.p[0] - 0.49) <= 1e-12);
    CHECK(std::abs(p.p[1] - 0.51) <= 1e-12);
  }

  SUBCASE("gamma 0 reduces to plain descent exactly") {
    MomentumBank bank = MomentumBank::zeros(2, 0.0, 0.1);
    GroupDistribution p{Eigen::Vector2d(0.5, 0.5), 1e-3};
    const Eigen::Vector2d grad(0.07, -0.07);
    momentum_update(bank, p, grad);
    CHECK(bank.v[0] == 0.1 * grad[0]);
    CHECK(bank.v[1] == 0.1 * grad[1]);
    momentum_update(bank, p, grad);
    CHECK(bank.v[0] == 0.1 * grad[0]);  // no history with gamma = 0
  }

  SUBCASE("repeated gradient converges geometrically to alpha grad / (1 - gamma)") {
    MomentumBank bank = MomentumBank::zeros(2, 0.1, 0.1);
    GroupDistribution p{Eigen::Vector2d(0.5, 0.5), 1e-3};
    const Eigen::Vector2d grad(0.1, -0.1);
    for (int step = 0; step < 50; ++step) momentum_update(bank, p, grad);
    const double limit = 0.1 * 0.1 / (1.0 - 0.1);
    CHECK(std::abs(bank.v[0] - limit) <= 1e-12);
    CHECK(std::abs(bank.v[1] + limit) <= 1e-12);
  }

  SUBCASE("a group above the mean loss lowers its sampling probability") {
    MomentumBank bank = MomentumBank::zeros(2, 0.0, 0.05);
    GroupDistribution p{Eigen::Vector2d(0.6, 0.4), 1e-3};
    GroupLossVector l;
    l.losses = Eigen::Vector2d(0.9, 0.5);
    const Eigen::VectorXd grads = group_gradients(l);
    CHECK(grads[0] > 0.0);
    momentum_update(bank, p, grads);
    CHECK(p.p[0] < 0.6);
    CHECK(p.p[1] > 0.4);
  }
}

TEST_CASE("project_simplex") {
  SUBCASE("valid input is renormalized in place") {
    Eigen::Vector2d raw(0.49, 0.51);
    const GroupDistribution p = project_simplex(raw, 1e-3);
    CHECK(p.p[0] == 0.49);
    CHECK(p.p[1] == 0.51);
    p.validate();
  }
  SUBCASE("floors a negative entry and redistributes the rest") {
    Eigen::Vector3d raw(0.5, 0.6, -0.1);
    const GroupDistribution p = project_simplex(raw, 1e-3);
    CHECK(p.p[0] == doctest::Approx(0.5 * 0.999 / 1.1).epsilon(1e-12));
    CHECK(p.p[1] == doctest::Approx(0.6 * 0.999 / 1.1).epsilon(1e-12));
    CHECK(p.p[2] == 1e-3);
    CHECK(p.p.sum() == doctest::Approx(1.0).epsilon(1e-15));
    p.validate();
  }
  SUBCASE("all-negative input becomes uniform") {
    Eigen::Vector3d raw(-0.5, -0.1, -0.2);
    const GroupDistribution p = project_simplex(raw, 1e-3);
    for (int k = 0; k < 3; ++k) CHECK(p.p[k] == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("iterates when rescaling pushes another entry under the floor") {
    Eigen::Vector3d raw(0.0011, 2.0, -0.5);
    const GroupDistribution p = project_simplex(raw, 1e-3);
    CHECK(p.p[0] == 1e-3);
    CHECK(p.p[2] == 1e-3);
    CHECK(p.p[1] == doctest::Approx(0.998).epsilon(1e-12));
    p.validate();
  }
  SUBCASE("random inputs always land on a valid floored simplex") {
    Rng rng(32);
    for (int trial = 0; trial < 1000; ++trial) {
      const int a = 2 + static_cast<int>(rng.uniform_index(7));
      Eigen::VectorXd raw(a);
      for (int k = 0; k < a; ++k) raw[k] = rng.uniform(-1.0, 2.0);
      const GroupDistribution p = project_simplex(raw, 1e-3);
      CHECK(p.p.minCoeff() >= 1e-3 - 1e-15);
      CHECK(std::abs(p.p.sum() - 1.0) <= 1e-12);
    }
  }
  SUBCASE("non-finite input is rejected") {
    Eigen::Vector2d raw(std::numeric_limits<double>::infinity(), 0.5);
    CHECK_THROWS_AS(project_simplex(raw, 1e-3), std::invalid_argument);
  }
}

TEST_CASE("recall_disp_loss is the absolute deviation sum") {
  GroupLossVector l;
  l.losses = Eigen::Vector2d(0.8, 0.6);
  CHECK(recall_disp_loss(l) == doctest::Approx(0.2).epsilon(1e-12));
  l.losses = Eigen::Vector3d(0.9, 0.6, 0.6);
  CHECK(recall_disp_loss(l) == doctest::Approx(0.4).epsilon(1e-12));
  l.losses = Eigen::Vector3d(0.7, 0.7, 0.7);
  CHECK(recall_disp_loss(l) <= 1e-12);
}
