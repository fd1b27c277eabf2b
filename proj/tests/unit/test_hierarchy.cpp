#include "cher/hierarchy.hpp"

#include <doctest.h>

#include <cmath>

using namespace cher;

namespace {

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

GoalSpec spec2(GoalMode mode, Vec scale = v({10.0, 10.0}), Vec offset = v({0.0, 0.0})) {
  GoalSpec g;
  g.state_indices = {0, 1};
  g.scale = std::move(scale);
  g.offset = std::move(offset);
  g.mode = mode;
  return g;
}

const Bounds kActions{v({-1.0, -2.0}), v({1.0, 4.0})};

Policies make_policies(std::uint64_t seed, const GoalSpec& spec, int state_dim = 4) {
  Rng rng(seed);
  return Policies::create(state_dim, kActions, spec, {16, 16}, rng);
}

void zero_all(Policies& p) {
  Policies::for_each(p, [](const char*, Mlp& n) { n.mutable_params().setZero(); });
}

}  // namespace

TEST_CASE("policy shapes follow the input layouts") {
  const GoalSpec g = spec2(GoalMode::Egocentric);
  const Policies p = make_policies(1, g);
  CHECK(p.manager_actor.input_dim() == 4);
  CHECK(p.manager_actor.output_dim() == 2);
  CHECK(p.manager_critic1.input_dim() == 6);
  CHECK(p.worker_actor.input_dim() == 6);
  CHECK(p.worker_critic1.input_dim() == 8);
  CHECK(p.worker_critic1.same_architecture(p.worker_critic2));
  CHECK(p.manager_critic1.same_architecture(p.manager_critic2));
  CHECK(p.worker_actor_target.params() == p.worker_actor.params());
  CHECK(p.state_dim() == 4);
  CHECK(p.goal_dim() == 2);
  CHECK(p.action_dim() == 2);
  CHECK(p.hierarchical());

  Rng rng(2);
  const Policies flat = Policies::create_flat(4, kActions, {8}, rng);
  CHECK_FALSE(flat.hierarchical());
  CHECK(flat.worker_actor.input_dim() == 4);
  CHECK(flat.goal_dim() == 0);
}

TEST_CASE("assign_goal: zero weights give the offset, outputs stay in bounds, calls repeat") {
  const GoalSpec g = spec2(GoalMode::Absolute, v({5.0, 2.0}), v({5.0, -1.0}));
  Policies p = make_policies(3, g);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Vec s = rng.normal_vec(4, 50.0);
    const Vec goal = assign_goal(p, s);
    CHECK(g.bounds().contains(goal));
    CHECK(assign_goal(p, s) == goal);
  }
  zero_all(p);
  CHECK(assign_goal(p, v({1.0, 2.0, 3.0, 4.0})) == v({5.0, -1.0}));
  CHECK_THROWS_AS(assign_goal(p, v({1.0})), ShapeError);
}

TEST_CASE("worker_action: zero weights give the range midpoint, outputs stay in bounds") {
  const GoalSpec g = spec2(GoalMode::Egocentric);
  Policies p = make_policies(5, g);
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const Vec a = worker_action(p, rng.normal_vec(4, 30.0), rng.normal_vec(2, 30.0));
    CHECK(kActions.contains(a));
  }
  zero_all(p);
  CHECK(worker_action(p, Vec::Ones(4), Vec::Ones(2)) == kActions.center());
  CHECK_THROWS_AS(worker_action(p, Vec::Ones(4), Vec::Ones(3)), ShapeError);
}

TEST_CASE("transition_goal examples") {
  const GoalSpec abs = spec2(GoalMode::Absolute);
  CHECK(transition_goal(abs, v({9.0, 9.0}), v({3.0, 4.0}), v({-1.0, 7.0})) == v({3.0, 4.0}));
  const GoalSpec ego = spec2(GoalMode::Egocentric);
  CHECK(transition_goal(ego, v({0.0, 0.0}), v({2.0, 2.0}), v({1.0, 1.0})) == v({1.0, 1.0}));
  CHECK_THROWS_AS(transition_goal(ego, v({0.0, 0.0}), v({2.0}), v({1.0, 1.0})), ShapeError);
  CHECK_THROWS_AS(transition_goal(ego, v({0.0}), v({2.0, 2.0}), v({1.0, 1.0})), ShapeError);
}

TEST_CASE("transition_goal only touches the goal coordinates") {
  GoalSpec g;
  g.state_indices = {2};
  g.scale = v({1.0});
  g.offset = v({0.0});
  CHECK(transition_goal(g, v({5.0, 5.0, 1.0}), v({3.0}), v({-5.0, 9.0, 2.5})) == v({1.5}));
}

TEST_CASE("egocentric chaining conserves s + g") {
  const GoalSpec ego = spec2(GoalMode::Egocentric);
  Rng rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    Vec s = rng.normal_vec(2, 10.0);
    Vec g = rng.normal_vec(2, 10.0);
    const Vec target = s + g;
    for (int t = 0; t < 10; ++t) {
      const Vec s_next = s + rng.normal_vec(2);
      g = transition_goal(ego, s, g, s_next);
      s = s_next;
      CHECK((s + g - target).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("intrinsic reward examples") {
  const GoalSpec abs = spec2(GoalMode::Absolute);
  CHECK(intrinsic_reward(abs, v({0.0, 0.0}), v({3.0, 4.0}), v({3.0, 4.0})) == 0.0);
  CHECK(intrinsic_reward(abs, v({5.0, 5.0}), v({1.0, 0.0}), v({0.0, 0.0})) == -1.0);
  CHECK(intrinsic_reward(abs, v({0.0, 0.0}), v({3.0, 4.0}), v({0.0, 0.0})) == -5.0);
  const GoalSpec ego = spec2(GoalMode::Egocentric);
  CHECK(intrinsic_reward(ego, v({1.0, 1.0}), v({1.0, 1.0}), v({2.0, 2.0})) == 0.0);
  CHECK(intrinsic_reward(ego, v({1.0, 1.0}), v({1.0, 1.0}), v({1.0, 1.0})) ==
        doctest::Approx(-std::sqrt(2.0)));
}

TEST_CASE("intrinsic reward is non-positive and egocentric rewards are translation invariant") {
  const GoalSpec ego = spec2(GoalMode::Egocentric);
  const GoalSpec abs = spec2(GoalMode::Absolute);
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec s = rng.normal_vec(2, 5.0), g = rng.normal_vec(2, 5.0), sn = rng.normal_vec(2, 5.0);
    const Vec shift = rng.normal_vec(2, 100.0);
    CHECK(intrinsic_reward(ego, s, g, sn) <= 0.0);
    CHECK(intrinsic_reward(abs, s, g, sn) <= 0.0);
    CHECK(intrinsic_reward(ego, s + shift, g, sn + shift) ==
          doctest::Approx(intrinsic_reward(ego, s, g, sn)).epsilon(1e-9));
  }
}

TEST_CASE("intrinsic reward gradient") {
  const GoalSpec abs = spec2(GoalMode::Absolute);
  CHECK(intrinsic_reward_goal_gradient(abs, v({0.0, 0.0}), v({1.0, 0.0}), v({0.0, 0.0})) ==
        v({-1.0, 0.0}));
  CHECK(intrinsic_reward_goal_gradient(abs, v({0.0, 0.0}), v({2.0, 3.0}), v({2.0, 3.0})) ==
        v({0.0, 0.0}));

  Rng rng(9);
  for (GoalMode mode : {GoalMode::Absolute, GoalMode::Egocentric}) {
    const GoalSpec spec = spec2(mode);
    for (int trial = 0; trial < 500; ++trial) {
      const Vec s = rng.normal_vec(2, 3.0), g = rng.normal_vec(2, 3.0), sn = rng.normal_vec(2, 3.0);
      const Vec grad = intrinsic_reward_goal_gradient(spec, s, g, sn);
      for (int i = 0; i < 2; ++i) {
        const double h = 1e-6;
        Vec gp = g, gm = g;
        gp[i] += h;
        gm[i] -= h;
        const double fd = (intrinsic_reward(spec, s, gp, sn) - intrinsic_reward(spec, s, gm, sn)) /
                          (2 * h);
        CHECK(std::abs(fd - grad[i]) <= 1e-5);
      }
    }
  }
}

TEST_CASE("goal spec validation") {
  GoalSpec g = spec2(GoalMode::Absolute);
  CHECK_NOTHROW(g.validate());
  g.scale = v({1.0});
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g = spec2(GoalMode::Absolute, v({1.0, 0.0}));
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g = spec2(GoalMode::Absolute);
  g.state_indices = {0, -1};
  CHECK_THROWS_AS(g.validate(), ValidationError);
  CHECK(goal_mode_from_string(to_string(GoalMode::Egocentric)) == GoalMode::Egocentric);
  CHECK_THROWS_AS(goal_mode_from_string("relative"), ValidationError);

  HierarchyConfig h;
  h.goal = spec2(GoalMode::Absolute);
  CHECK_NOTHROW(h.validate());
  h.meta_period = 0;
  CHECK_THROWS_AS(h.validate(), ValidationError);
}

TEST_CASE("explore: warmup is uniform within bounds") {
  Rng rng(10);
  ExplorationConfig cfg{100, 0.1};
  const Vec value = v({0.0, 1.0});
  Vec lo = kActions.high, hi = kActions.low;
  for (int i = 0; i < 20000; ++i) {
    const Vec x = explore(value, kActions, rng, 50, cfg);
    CHECK(kActions.contains(x));
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  // covers the box, not just the neighbourhood of the value
  CHECK((lo - kActions.low).cwiseAbs().maxCoeff() < 0.01);
  CHECK((hi - kActions.high).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("explore: post-warmup noise std is 0.1 of the half-width") {
  Rng rng(11);
  const Bounds wide{v({-100.0, -200.0}), v({100.0, 200.0})};
  ExplorationConfig cfg{0, 0.1};
  const Vec value = v({0.0, 0.0});
  const int n = 100000;
  Vec sum = Vec::Zero(2), sq = Vec::Zero(2);
  for (int i = 0; i < n; ++i) {
    const Vec x = explore(value, wide, rng, 10, cfg);
    sum += x;
    sq += x.cwiseProduct(x);
  }
  const Vec mean = sum / n;
  const Vec std = (sq / n - mean.cwiseProduct(mean)).cwiseSqrt();
  CHECK(std[0] == doctest::Approx(10.0).epsilon(0.05));
  CHECK(std[1] == doctest::Approx(20.0).epsilon(0.05));
}

TEST_CASE("explore: zero noise leaves the value unchanged, clipping applies") {
  Rng rng(12);
  ExplorationConfig cfg{0, 0.0};
  CHECK(explore(v({0.3, -1.0}), kActions, rng, 5, cfg) == v({0.3, -1.0}));
  ExplorationConfig noisy{0, 0.5};
  for (int i = 0; i < 1000; ++i) CHECK(kActions.contains(explore(v({1.0, 4.0}), kActions, rng, 5, noisy)));
}
