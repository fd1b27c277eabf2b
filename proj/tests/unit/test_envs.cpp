#include "cher/envs/nav.hpp"
#include "cher/envs/ring.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace cher;

namespace {

Vec v2(double x, double y) {
  Vec out(2);
  out << x, y;
  return out;
}

}  // namespace

// ---- nav ------------------------------------------------------------------

TEST_CASE("nav resets at the origin at rest") {
  Rng rng(1);
  for (Arena a : {Arena::Gather, Arena::FourRooms, Arena::Maze}) {
    NavEnv env(NavConfig::preset(a));
    const Vec obs = env.reset(rng);
    CHECK(obs.size() == env.observation_dim());
    CHECK(obs.head(4).isZero(0.0));
    CHECK(env.state().step == 0);
  }
}

TEST_CASE("gather places 8 apples and 8 bombs away from the start") {
  Rng rng(2);
  const NavConfig c = NavConfig::gather();
  for (int i = 0; i < 100; ++i) {
    const NavState s = nav_reset(c, rng);
    REQUIRE(s.items.size() == 16);
    int apples = 0;
    for (const Item& it : s.items) {
      apples += it.apple;
      CHECK(it.position.norm() >= c.item_clearance);
      CHECK(free_of_walls(it.position, c, 0.0));
    }
    CHECK(apples == 8);
  }
}

TEST_CASE("maze targets fall inside the target box") {
  Rng rng(3);
  const NavConfig c = NavConfig::maze();
  Eigen::Vector2d lo = c.target_high, hi = c.target_low;
  for (int i = 0; i < 10000; ++i) {
    const Vec2 t = nav_reset(c, rng).target;
    CHECK((t.array() >= c.target_low.array()).all());
    CHECK((t.array() <= c.target_high.array()).all());
    lo = lo.cwiseMin(t);
    hi = hi.cwiseMax(t);
  }
  CHECK((lo - c.target_low).norm() < 0.1);
  CHECK((hi - c.target_high).norm() < 0.1);
}

TEST_CASE("four rooms draws each corner target") {
  Rng rng(4);
  const NavConfig c = NavConfig::four_rooms();
  std::array<int, 3> seen{};
  for (int i = 0; i < 3000; ++i) {
    const Vec2 t = nav_reset(c, rng).target;
    for (std::size_t k = 0; k < 3; ++k) seen[k] += t == c.targets[k];
  }
  CHECK(seen[0] + seen[1] + seen[2] == 3000);
  for (int n : seen) CHECK(n > 900);
}

TEST_CASE("zero action from rest stays put; reward is minus the target distance") {
  const NavConfig c = NavConfig::four_rooms();
  NavState s;
  s.target = {20.0, 0.0};
  const NavStepResult r = nav_step(s, v2(0.0, 0.0), c);
  CHECK(r.state.position == Vec2(0.0, 0.0));
  CHECK(r.reward == -20.0);
  CHECK(r.state.step == 1);
  s.position = {17.0, 4.0};
  CHECK(nav_step(s, v2(0.0, 0.0), c).reward == -5.0);
}

TEST_CASE("nav dynamics: acceleration, speed cap, action clipping") {
  const NavConfig c = NavConfig::maze();
  NavState s;
  NavStepResult r = nav_step(s, v2(0.5, 0.0), c);
  CHECK(r.state.velocity == Vec2(0.5, 0.0));
  CHECK(r.state.position == Vec2(0.5, 0.0));
  r = nav_step(s, v2(5.0, 5.0), c);  // clipped to (1, 1), then capped to unit speed
  CHECK(r.state.velocity.norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(nav_step(s, Vec::Zero(3), c), ShapeError);
}

TEST_CASE("walls stop motion and zero the blocked velocity") {
  const NavConfig c = NavConfig::four_rooms();
  NavState s;
  s.position = {9.5, 0.0};
  s.velocity = {1.0, 0.0};
  const NavStepResult r = nav_step(s, v2(1.0, 0.0), c);
  CHECK(r.state.position.x() < 10.0);
  CHECK(r.state.velocity.x() == 0.0);

  // the doorway at y in (3, 7) lets the agent through
  s.position = {9.5, 5.0};
  CHECK(nav_step(s, v2(1.0, 0.0), c).state.position.x() > 10.0);
}

TEST_CASE("random walks never leave the arena or cross a wall") {
  Rng rng(5);
  for (Arena a : {Arena::FourRooms, Arena::Maze, Arena::Gather}) {
    const NavConfig c = NavConfig::preset(a);
    NavState s = nav_reset(c, rng);
    for (int t = 0; t < 5000; ++t) {
      const Vec2 before = s.position;
      s = nav_step(s, rng.uniform_vec(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)), c).state;
      CHECK((s.position.array() >= c.arena_low.array()).all());
      CHECK((s.position.array() <= c.arena_high.array()).all());
      for (const Wall& w : c.walls) {
        const int axis = w.vertical() ? 0 : 1;
        const double wall = w.a[axis];
        const double lo = std::min(w.a[1 - axis], w.b[1 - axis]);
        const double hi = std::max(w.a[1 - axis], w.b[1 - axis]);
        const bool crossed = (before[axis] - wall) * (s.position[axis] - wall) < 0.0;
        // motion resolves x first, then y at the new x
        const double across = axis == 0 ? before.y() : s.position.x();
        const bool within = across >= lo && across <= hi;
        CHECK_FALSE((crossed && within));
      }
    }
  }
}

TEST_CASE("gather episode return stays within [-8, 8]") {
  Rng rng(6);
  NavEnv env(NavConfig::gather());
  for (int ep = 0; ep < 30; ++ep) {
    env.reset(rng);
    double total = 0.0;
    for (int t = 0; t < env.horizon(); ++t) {
      const StepResult r = env.step(rng.uniform_vec(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)));
      CHECK(r.reward == std::round(r.reward));
      total += r.reward;
      if (r.done()) break;
    }
    CHECK(total >= -8.0);
    CHECK(total <= 8.0);
  }
}

TEST_CASE("gather pickup removes the item and pays its sign") {
  NavConfig c = NavConfig::gather();
  NavState s;
  s.items = {{{0.5, 0.0}, true}, {{-0.5, 0.0}, false}, {{5.0, 5.0}, true}};
  const NavStepResult r = nav_step(s, v2(0.0, 0.0), c);
  CHECK(r.reward == 0.0);  // +1 and -1
  CHECK(r.state.items.size() == 1);
}

TEST_CASE("nav horizon truncates, success radius") {
  NavConfig c = NavConfig::four_rooms();
  c.horizon = 3;
  NavEnv env(c);
  Rng rng(7);
  env.reset(rng);
  env.set_target(v2(0.0, 3.0));
  CHECK(env.success());
  CHECK(env.observe().tail(2) == v2(0.0, 3.0));
  CHECK_FALSE(env.step(v2(0, 0)).done());
  CHECK_FALSE(env.step(v2(0, 0)).done());
  const StepResult last = env.step(v2(0, 0));
  CHECK(last.truncated);
  CHECK_FALSE(last.terminal);
  env.set_target(v2(20.0, 20.0));
  CHECK_FALSE(env.success());
}

TEST_CASE("nav trajectory rows follow the header") {
  NavEnv env(NavConfig::four_rooms());
  Rng rng(8);
  env.reset(rng);
  std::ostringstream out;
  env.write_trajectory_header(out);
  env.write_trajectory_rows(out, 0, -1.5);
  CHECK(out.str() == "step,agent,x,y,vx,vy,reward\n0,0,0,0,0,0,-1.5\n");
}

// ---- ring -----------------------------------------------------------------

TEST_CASE("ring reward examples") {
  RingConfig c;
  CHECK(ring_reward(std::vector<double>(22, 5.0), c) == doctest::Approx(55.0));
  CHECK(ring_reward(std::vector<double>(22, 0.0), c) == 0.0);
  c.mean_speed_reward = true;
  CHECK(ring_reward(std::vector<double>(4, 3.0), c) == doctest::Approx(0.9));
}

TEST_CASE("IDM equilibrium: zero acceleration, and a noiseless platoon holds it") {
  RingConfig c;
  c.accel_noise = 0.0;
  const double length = 230.0;
  const double gap = length / c.n_vehicles - c.vehicle_length;
  const double v = idm_equilibrium_speed(c.idm, gap);
  CHECK(std::abs(idm_acceleration(c.idm, v, v, gap)) < 1e-9);
  RingState s = ring_place(c, length, v, 0.0);
  Rng rng(9);
  for (int t = 0; t < 300; ++t) s = ring_step_all_idm(s, c, rng).state;
  for (double speed : s.speeds) CHECK(std::abs(speed - v) < 1e-6);
}

TEST_CASE("ring keeps order, conserves the gap sum and stays non-negative") {
  RingConfig c;
  for (bool human_av : {true, false}) {
    Rng rng(10);
    RingState s = ring_reset(c, rng);
    const double total = s.ring_length - c.n_vehicles * c.vehicle_length;
    for (int t = 0; t < 2000; ++t) {
      // a random AV with bounded braking may rear-end a wave; humans alone never do
      RingStepResult r = human_av ? ring_step_all_idm(s, c, rng)
                                  : ring_step(s, rng.uniform(-1.0, 1.0), c, rng);
      if (r.done) break;
      s = std::move(r.state);
      double sum = 0.0;
      for (int i = 0; i < s.size(); ++i) {
        const double g = s.gap(i, c.vehicle_length);
        CHECK(g >= 0.0);
        sum += g;
        CHECK(s.speeds[i] >= 0.0);
        CHECK(s.positions[i] >= 0.0);
        CHECK(s.positions[i] < s.ring_length);
      }
      CHECK(sum == doctest::Approx(total).epsilon(1e-9));
    }
    if (human_av) CHECK(s.step == 2000);
  }
}

TEST_CASE("a perturbed ring forms stop-and-go waves during a 300 s warmup") {
  RingConfig c;
  c.warmup_steps = 1500;
  Rng rng(11);
  const RingState s = ring_reset(c, rng);
  CHECK(speed_std(s.speeds) > 3.0 * s.initial_speed_std);
}

TEST_CASE("ring observation holds the last five AV feature rows") {
  RingConfig c;
  RingEnv env(c);
  Rng rng(12);
  const Vec obs = env.reset(rng);
  CHECK(obs.size() == 25);
  CHECK(env.observation_dim() == 25);
  const RingState& s = env.state();
  CHECK(obs[0] == s.speeds[s.av_index]);
  CHECK(obs[2] == doctest::Approx(s.gap(s.av_index, c.vehicle_length)));
  const StepResult r = env.step(Vec::Constant(1, 0.5));
  CHECK(r.observation.segment(5, 20) == obs.head(20));
  CHECK(r.observation[0] == env.state().speeds[env.state().av_index]);
}

TEST_CASE("ring collision ends the episode with zero reward") {
  RingConfig c;
  c.accel_noise = 0.0;
  RingState s = ring_place(c, 230.0, 20.0, 0.0);
  s.positions[1] = s.positions[0] + c.vehicle_length + 0.1;  // leader right ahead
  s.speeds[1] = 0.0;
  Rng rng(13);
  const RingStepResult r = ring_step(s, 1.0, c, rng);
  CHECK(r.done);
  CHECK(r.reward == 0.0);
  CHECK(r.state.collided);
}

TEST_CASE("ring action clipping and truncation") {
  RingConfig c;
  c.accel_noise = 0.0;
  c.horizon = 2;
  c.warmup_steps = 0;
  RingEnv env(c);
  Rng rng(14);
  env.reset(rng);
  const double v0 = env.state().speeds[0];
  CHECK_FALSE(env.step(Vec::Constant(1, 50.0)).done());
  CHECK(env.state().speeds[0] == doctest::Approx(v0 + c.av_max_accel * c.dt));
  CHECK(env.step(Vec::Zero(1)).truncated);
  CHECK_THROWS_AS(env.step(Vec::Zero(2)), ShapeError);
}

TEST_CASE("environment configs validate") {
  NavConfig n = NavConfig::four_rooms();
  n.targets.clear();
  CHECK_THROWS_AS(n.validate(), ValidationError);
  RingConfig r;
  r.ring_length_min = 50.0;
  CHECK_THROWS_AS(r.validate(), ValidationError);
  r = RingConfig{};
  r.n_vehicles = 1;
  CHECK_THROWS_AS(r.validate(), ValidationError);
}
