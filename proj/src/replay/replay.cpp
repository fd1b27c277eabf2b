#include "cher/replay.hpp"

#include <cmath>
#include <string>

namespace cher {
namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

MetaSegment make_segment(const GoalSpec& spec, double manager_reward_scale,
                         std::vector<Vec> states, const Vec& initial_goal,
                         std::vector<Vec> actions, const std::vector<double>& env_rewards,
                         bool done) {
  require_shape(states.size() == actions.size() + 1 && env_rewards.size() == actions.size(),
                "make_segment: need k+1 states, k actions and k rewards");
  MetaSegment seg;
  seg.initial_goal = initial_goal;
  seg.done = done;
  Vec goal = initial_goal;
  double total = 0.0;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    seg.goals.push_back(goal);
    seg.worker_rewards.push_back(intrinsic_reward(spec, states[t], goal, states[t + 1]));
    total += env_rewards[t];
    goal = transition_goal(spec, states[t], goal, states[t + 1]);
  }
  seg.manager_reward = manager_reward_scale * total;
  seg.states = std::move(states);
  seg.actions = std::move(actions);
  return seg;
}

void validate_segment(const MetaSegment& seg, const GoalSpec& spec, int meta_period) {
  const std::size_t k = seg.length();
  if (k == 0) throw ValidationError("segment has no transitions");
  if (k > static_cast<std::size_t>(meta_period))
    throw ValidationError("segment longer than the meta period");
  if (seg.states.size() != k + 1 || seg.goals.size() != k || seg.worker_rewards.size() != k)
    throw ValidationError("segment arrays have inconsistent lengths");
  if (seg.initial_goal.size() != spec.dim())
    throw ValidationError("segment initial goal has the wrong dimension");
  if (!std::isfinite(seg.manager_reward)) throw ValidationError("segment manager reward not finite");
  const Eigen::Index state_dim = seg.states.front().size();
  const Eigen::Index action_dim = seg.actions.front().size();
  for (std::size_t t = 0; t <= k; ++t) {
    if (seg.states[t].size() != state_dim || !all_finite(seg.states[t]))
      throw ValidationError("segment state " + std::to_string(t) + " malformed");
  }
  spec.check_state(seg.states.front());
  for (std::size_t t = 0; t < k; ++t) {
    if (seg.actions[t].size() != action_dim || !all_finite(seg.actions[t]))
      throw ValidationError("segment action " + std::to_string(t) + " malformed");
    if (!std::isfinite(seg.worker_rewards[t]))
      throw ValidationError("segment worker reward " + std::to_string(t) + " not finite");
    const Vec expected = t == 0 ? seg.initial_goal
                                : transition_goal(spec, seg.states[t - 1], seg.goals[t - 1],
                                                  seg.states[t]);
    if (seg.goals[t].size() != spec.dim() || seg.goals[t] != expected)
      throw ValidationError("segment goal " + std::to_string(t) +
                            " violates the goal-transition law");
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, GoalSpec spec, int meta_period)
    : capacity_(capacity), spec_(std::move(spec)), meta_period_(meta_period) {
  if (capacity_ == 0) throw ValidationError("replay capacity must be positive");
  if (meta_period_ < 1) throw ValidationError("meta period must be >= 1");
  spec_.validate();
}

void ReplayBuffer::store(MetaSegment segment) {
  validate_segment(segment, spec_, meta_period_);
  if (segments_.size() == capacity_) segments_.pop_front();
  segments_.push_back(std::move(segment));
}

std::vector<std::pair<std::size_t, std::size_t>> ReplayBuffer::sample_transition_indices(
    std::size_t n, Rng& rng) const {
  if (segments_.empty()) throw UnavailableError("cannot sample from an empty replay buffer");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(n);
  // Rejection on segment length keeps the draw uniform over transitions when
  // some spans were cut short.
  const double k = static_cast<double>(meta_period_);
  while (out.size() < n) {
    const std::size_t s = rng.index(segments_.size());
    const std::size_t len = segments_[s].length();
    if (len < static_cast<std::size_t>(meta_period_) &&
        rng.uniform() >= static_cast<double>(len) / k)
      continue;
    out.emplace_back(s, rng.index(len));
  }
  return out;
}

std::vector<std::size_t> ReplayBuffer::sample_segment_indices(std::size_t n, Rng& rng) const {
  if (segments_.empty()) throw UnavailableError("cannot sample from an empty replay buffer");
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = rng.index(segments_.size());
  return out;
}

namespace {

WorkerTransition transition_at(const MetaSegment& seg, const GoalSpec& spec, std::size_t t) {
  WorkerTransition tr;
  tr.state = seg.states[t];
  tr.goal = seg.goals[t];
  tr.action = seg.actions[t];
  tr.reward = seg.worker_rewards[t];
  tr.next_state = seg.states[t + 1];
  tr.next_goal = transition_goal(spec, seg.states[t], seg.goals[t], seg.states[t + 1]);
  tr.done = seg.done && t + 1 == seg.length();
  return tr;
}

}  // namespace

WorkerBatch to_batch(const std::vector<WorkerTransition>& trs) {
  require_shape(!trs.empty(), "to_batch: no transitions");
  const auto n = static_cast<Eigen::Index>(trs.size());
  const auto& f = trs.front();
  WorkerBatch b;
  b.states.resize(f.state.size(), n);
  b.goals.resize(f.goal.size(), n);
  b.actions.resize(f.action.size(), n);
  b.rewards.resize(n);
  b.next_states.resize(f.state.size(), n);
  b.next_goals.resize(f.goal.size(), n);
  b.dones.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& t = trs[static_cast<std::size_t>(j)];
    b.states.col(j) = t.state;
    b.goals.col(j) = t.goal;
    b.actions.col(j) = t.action;
    b.rewards[j] = t.reward;
    b.next_states.col(j) = t.next_state;
    b.next_goals.col(j) = t.next_goal;
    b.dones[j] = t.done ? 1.0 : 0.0;
  }
  return b;
}

WorkerBatch sample_worker_batch(const ReplayBuffer& buffer, std::size_t n, Rng& rng,
                                const HindsightSampling* hindsight) {
  const auto indices = buffer.sample_transition_indices(n, rng);
  std::vector<WorkerTransition> trs;
  trs.reserve(n);
  for (const auto& [s, t] : indices) {
    const MetaSegment& seg = buffer.at(s);
    if (hindsight != nullptr && rng.bernoulli(hindsight->probability)) {
      trs.push_back(hac_hindsight(seg, buffer.goal_spec())[t]);
    } else {
      trs.push_back(transition_at(seg, buffer.goal_spec(), t));
    }
  }
  return to_batch(trs);
}

ManagerBatch sample_manager_batch(const ReplayBuffer& buffer, std::size_t n, Rng& rng) {
  const auto indices = buffer.sample_segment_indices(n, rng);
  const auto m = static_cast<Eigen::Index>(n);
  const MetaSegment& first = buffer.at(indices.front());
  const Eigen::Index sd = first.states.front().size();
  const Eigen::Index gd = first.initial_goal.size();
  ManagerBatch b;
  b.states.resize(sd, m);
  b.goals.resize(gd, m);
  b.rewards.resize(m);
  b.next_states.resize(sd, m);
  b.dones.resize(m);
  b.first_next_states.resize(sd, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const MetaSegment& seg = buffer.at(indices[static_cast<std::size_t>(j)]);
    b.states.col(j) = seg.states.front();
    b.goals.col(j) = seg.initial_goal;
    b.rewards[j] = seg.manager_reward;
    b.next_states.col(j) = seg.states.back();
    b.dones[j] = seg.done ? 1.0 : 0.0;
    b.first_next_states.col(j) = seg.states[1];
    b.segments.push_back(&seg);
  }
  return b;
}

Vec achieved_goal(const MetaSegment& seg, const GoalSpec& spec) {
  require_shape(seg.length() >= 1, "achieved_goal on an empty segment");
  if (spec.mode == GoalMode::Absolute) return spec.select(seg.states.back());
  return spec.select(seg.states.back()) - spec.select(seg.states.front());
}

std::vector<Vec> hiro_candidates(const MetaSegment& seg, const GoalSpec& spec, int num_candidates,
                                 Rng& rng) {
  std::vector<Vec> out;
  if (num_candidates < 1) return out;
  const Bounds box = spec.bounds();
  out.push_back(seg.initial_goal);
  if (num_candidates < 2) return out;
  const Vec center = box.clip(achieved_goal(seg, spec));
  out.push_back(center);
  const Vec std = 0.5 * spec.scale;
  for (int c = 2; c < num_candidates; ++c) {
    Vec g = center;
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += rng.normal(0.0, std[i]);
    out.push_back(box.clip(g));
  }
  return out;
}

double hiro_score(const MetaSegment& seg, const GoalSpec& spec, const Mlp& worker_actor,
                  const Vec& candidate) {
  const std::size_t k = seg.length();
  const Eigen::Index sd = seg.states.front().size();
  Mat inputs(sd + spec.dim(), static_cast<Eigen::Index>(k));
  Vec g = candidate;
  for (std::size_t t = 0; t < k; ++t) {
    inputs.col(static_cast<Eigen::Index>(t)) << seg.states[t], g;
    g = transition_goal(spec, seg.states[t], g, seg.states[t + 1]);
  }
  const Mat predicted = worker_actor.forward_batch(inputs);
  double score = 0.0;
  for (std::size_t t = 0; t < k; ++t)
    score += (seg.actions[t] - predicted.col(static_cast<Eigen::Index>(t))).squaredNorm();
  return score;
}

std::size_t hiro_select(const MetaSegment& seg, const GoalSpec& spec, const Mlp& worker_actor,
                        const std::vector<Vec>& candidates) {
  require_shape(!candidates.empty(), "hiro_select: no candidates");
  std::size_t best = 0;
  double best_score = hiro_score(seg, spec, worker_actor, candidates[0]);
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const double s = hiro_score(seg, spec, worker_actor, candidates[c]);
    if (s < best_score) {
      best = c;
      best_score = s;
    }
  }
  return best;
}

Vec hiro_relabel(const MetaSegment& seg, const GoalSpec& spec, const Mlp& worker_actor,
                 int num_candidates, Rng& rng) {
  const auto candidates = hiro_candidates(seg, spec, std::max(num_candidates, 1), rng);
  return candidates[hiro_select(seg, spec, worker_actor, candidates)];
}

std::vector<WorkerTransition> hac_hindsight(const MetaSegment& seg, const GoalSpec& spec) {
  const std::size_t k = seg.length();
  require_shape(k >= 1, "hac_hindsight on an empty segment");
  const Vec reached = spec.select(seg.states.back());
  std::vector<WorkerTransition> out;
  out.reserve(k);
  for (std::size_t t = 0; t < k; ++t) {
    WorkerTransition tr;
    tr.state = seg.states[t];
    tr.action = seg.actions[t];
    tr.next_state = seg.states[t + 1];
    tr.goal = spec.mode == GoalMode::Absolute ? reached : Vec(reached - spec.select(seg.states[t]));
    tr.reward = intrinsic_reward(spec, tr.state, tr.goal, tr.next_state);
    tr.next_goal = transition_goal(spec, tr.state, tr.goal, tr.next_state);
    tr.done = seg.done && t + 1 == k;
    out.push_back(std::move(tr));
  }
  return out;
}

bool subgoal_test_gate(Rng& rng, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ValidationError("subgoal test rate must lie in [0, 1]");
  return rng.uniform() < rate;
}

Checkpoint dump_replay(const ReplayBuffer& buffer) {
  Checkpoint ckpt;
  const GoalSpec& spec = buffer.goal_spec();
  ckpt.meta = {{"kind", "replay"},
               {"capacity", buffer.capacity()},
               {"meta_period", buffer.meta_period()},
               {"goal_mode", to_string(spec.mode)},
               {"state_indices", spec.state_indices},
               {"goal_scale", std::vector<double>(spec.scale.data(), spec.scale.data() + spec.dim())},
               {"goal_offset",
                std::vector<double>(spec.offset.data(), spec.offset.data() + spec.dim())},
               {"size", buffer.size()}};
  if (buffer.empty()) return ckpt;
  const auto& f = buffer.at(0);
  ckpt.meta["state_dim"] = f.states.front().size();
  ckpt.meta["action_dim"] = f.actions.front().size();
  std::vector<double> lengths, flags, manager_rewards, states, goals, actions, rewards, initial;
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const auto& s = buffer.at(i);
    lengths.push_back(static_cast<double>(s.length()));
    flags.push_back((s.done ? 1.0 : 0.0) + (s.subgoal_failed ? 2.0 : 0.0));
    manager_rewards.push_back(s.manager_reward);
    for (const auto& v : s.states) states.insert(states.end(), v.data(), v.data() + v.size());
    for (const auto& v : s.goals) goals.insert(goals.end(), v.data(), v.data() + v.size());
    for (const auto& v : s.actions) actions.insert(actions.end(), v.data(), v.data() + v.size());
    rewards.insert(rewards.end(), s.worker_rewards.begin(), s.worker_rewards.end());
    initial.insert(initial.end(), s.initial_goal.data(), s.initial_goal.data() + s.initial_goal.size());
  }
  auto put = [&](const char* name, const std::vector<double>& v) {
    ckpt.arrays.emplace_back(name, Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  put("lengths", lengths);
  put("flags", flags);
  put("manager_rewards", manager_rewards);
  put("states", states);
  put("goals", goals);
  put("actions", actions);
  put("worker_rewards", rewards);
  put("initial_goals", initial);
  return ckpt;
}

ReplayBuffer restore_replay(const Checkpoint& ckpt) {
  const auto& m = ckpt.meta;
  if (m.value("kind", "") != "replay") throw ValidationError("checkpoint is not a replay dump");
  GoalSpec spec;
  spec.mode = goal_mode_from_string(m.at("goal_mode").get<std::string>());
  spec.state_indices = m.at("state_indices").get<std::vector<int>>();
  auto sc = m.at("goal_scale").get<std::vector<double>>();
  auto of = m.at("goal_offset").get<std::vector<double>>();
  spec.scale = Eigen::Map<const Vec>(sc.data(), static_cast<Eigen::Index>(sc.size()));
  spec.offset = Eigen::Map<const Vec>(of.data(), static_cast<Eigen::Index>(of.size()));
  ReplayBuffer buffer(m.at("capacity").get<std::size_t>(), spec, m.at("meta_period").get<int>());
  const auto size = m.at("size").get<std::size_t>();
  if (size == 0) return buffer;
  const auto sd = m.at("state_dim").get<Eigen::Index>();
  const auto ad = m.at("action_dim").get<Eigen::Index>();
  const Eigen::Index gd = spec.dim();
  const Vec& lengths = ckpt.array("lengths");
  const Vec& flags = ckpt.array("flags");
  const Vec& mr = ckpt.array("manager_rewards");
  const Vec& states = ckpt.array("states");
  const Vec& goals = ckpt.array("goals");
  const Vec& actions = ckpt.array("actions");
  const Vec& rewards = ckpt.array("worker_rewards");
  const Vec& initial = ckpt.array("initial_goals");
  if (lengths.size() != static_cast<Eigen::Index>(size))
    throw ValidationError("replay dump: length table does not match size");
  Eigen::Index ps = 0, pg = 0, pa = 0, pr = 0;
  auto take = [](const Vec& src, Eigen::Index& pos, Eigen::Index n) {
    if (pos + n > src.size()) throw ValidationError("replay dump truncated");
    Vec v = src.segment(pos, n);
    pos += n;
    return v;
  };
  for (std::size_t i = 0; i < size; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto len = static_cast<std::size_t>(lengths[ii]);
    MetaSegment s;
    for (std::size_t t = 0; t <= len; ++t) s.states.push_back(take(states, ps, sd));
    for (std::size_t t = 0; t < len; ++t) {
      s.goals.push_back(take(goals, pg, gd));
      s.actions.push_back(take(actions, pa, ad));
      s.worker_rewards.push_back(rewards[pr++]);
    }
    s.initial_goal = initial.segment(ii * gd, gd);
    const int f = static_cast<int>(flags[ii]);
    s.done = (f & 1) != 0;
    s.subgoal_failed = (f & 2) != 0;
    s.manager_reward = mr[ii];
    buffer.store(std::move(s));
  }
  return buffer;
}

}  // namespace cher
