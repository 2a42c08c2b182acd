#include "gbetd/environments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace gbetd {

namespace {

// Sub-rows of P and P° for the central state and one group, states labeled
// central, then the five group states in clockwise order.
constexpr double kTargetSub[6][6] = {
    {0, 0.25, 0, 0, 0, 0},  //
    {0, 0, 1, 0, 0, 0},     //
    {0, 0.2, 0, 0.8, 0, 0}, //
    {0, 0, 0.2, 0, 0.8, 0}, //
    {0, 0, 0, 0.2, 0, 0.8}, //
    {0.8, 0, 0, 0, 0.2, 0},
};
constexpr double kBehaviorSub[6][6] = {
    {0, 0.25, 0, 0, 0, 0},  //
    {0, 0, 1, 0, 0, 0},     //
    {0, 0.5, 0, 0.5, 0, 0}, //
    {0, 0, 0.5, 0, 0.5, 0}, //
    {0, 0, 0, 0.5, 0, 0.5}, //
    {0.5, 0, 0, 0, 0.5, 0},
};

Matrix expand_toy(const double sub[6][6]) {
  Matrix p(21, 21);
  auto global = [](int group, int local) { return 1 + 5 * group + local; };
  for (int g = 0; g < 4; ++g) {
    p(0, global(g, 0)) = sub[0][1];  // central row, one entry per group
    for (int i = 0; i < 5; ++i) {
      p(global(g, i), 0) = sub[i + 1][0];
      for (int j = 0; j < 5; ++j) p(global(g, i), global(g, j)) = sub[i + 1][j + 1];
    }
  }
  return p;
}

}  // namespace

MdpFile build_toy() {
  MdpFile out;
  TabularMdp& mdp = out.mdp;
  mdp.n_states = 21;
  mdp.p_target = expand_toy(kTargetSub);
  mdp.p_behavior = expand_toy(kBehaviorSub);
  mdp.discount.assign(21, 0.9);

  // +1 leaving the middle state of the two northern groups (0 and 3),
  // -1 for the southern ones (1 and 2).
  mdp.reward = Matrix(21, 21);
  const double group_reward[4] = {1.0, -1.0, -1.0, 1.0};
  for (int g = 0; g < 4; ++g) {
    const int middle = 1 + 5 * g + 2;
    for (int t = 0; t < 21; ++t) mdp.reward(middle, t) = group_reward[g];
  }

  Matrix phi(21, 5);
  phi(0, 0) = 1.0;
  for (int g = 0; g < 4; ++g)
    for (int i = 0; i < 5; ++i) phi(1 + 5 * g + i, 1 + g) = 1.0;
  out.features = make_feature_map(std::move(phi));
  return out;
}

MdpFile build_two_state() {
  MdpFile out;
  TabularMdp& mdp = out.mdp;
  mdp.n_states = 2;
  mdp.p_target = Matrix(2, 2);
  mdp.p_target(0, 1) = 1.0;
  mdp.p_target(1, 0) = 1.0;
  mdp.p_behavior = mdp.p_target;
  mdp.reward = Matrix(2, 2);
  mdp.discount.assign(2, 0.95);
  Matrix phi(2, 2);
  phi(0, 0) = 3.0;
  phi(0, 1) = 1.0;
  phi(1, 0) = 1.0;
  phi(1, 1) = 1.0;
  out.features = make_feature_map(std::move(phi));
  return out;
}

// ---------------------------------------------------------------------------
// Mountain Car
// ---------------------------------------------------------------------------

bool mcar_terminal(const McarState& s) { return s.position >= kMcarMaxPos; }

McarStepResult mcar_step(const McarState& s, McarAction a) {
  if (mcar_terminal(s)) throw std::domain_error("mcar_step: stepping a terminal state");
  const double accel = static_cast<double>(static_cast<int>(a) - 1);  // -1, 0, +1
  McarStepResult r;
  double vel = s.velocity + 0.001 * accel - 0.0025 * std::cos(3.0 * s.position);
  vel = std::clamp(vel, -kMcarMaxVel, kMcarMaxVel);
  double pos = s.position + vel;
  if (pos <= kMcarMinPos) {
    pos = kMcarMinPos;
    vel = 0.0;  // inelastic wall at the back hill
  }
  pos = std::min(pos, kMcarMaxPos);
  r.next = {pos, vel};
  r.reward = kMcarActionReward[static_cast<int>(a)];
  r.terminal = mcar_terminal(r.next);
  r.discount = r.terminal ? 0.0 : 1.0;
  return r;
}

namespace {
constexpr double kNearZeroVelocity = 0.001;
}

McarAction mcar_target_action(const McarState& s, RngStream& rng) {
  if (s.position < -1.0) return McarAction::kCoast;
  if (std::abs(s.velocity) < kNearZeroVelocity)
    return rng.next_double() < 0.5 ? McarAction::kForward : McarAction::kBack;
  return s.velocity > 0.0 ? McarAction::kForward : McarAction::kBack;
}

double mcar_target_action_prob(const McarState& s, McarAction a) {
  if (s.position < -1.0) return a == McarAction::kCoast ? 1.0 : 0.0;
  if (std::abs(s.velocity) < kNearZeroVelocity)
    return a == McarAction::kCoast ? 0.0 : 0.5;
  const McarAction move = s.velocity > 0.0 ? McarAction::kForward : McarAction::kBack;
  return a == move ? 1.0 : 0.0;
}

McarBehaviorProcess::McarBehaviorProcess(std::uint64_t seed)
    : rng_(seed, RngStreamId::kTransition) {
  state_ = {-0.5, 0.0};
}

McarState McarBehaviorProcess::random_state() {
  const double pos = kMcarMinPos + (kMcarMaxPos - kMcarMinPos) * rng_.next_double();
  const double vel = -kMcarMaxVel + 2.0 * kMcarMaxVel * rng_.next_double();
  return {pos, vel};
}

McarBehaviorEvent McarBehaviorProcess::step() {
  McarBehaviorEvent ev;
  ev.state_before = state_;
  if (mcar_terminal(state_)) {
    // Restart: near the valley bottom or uniformly, with equal probability.
    if (rng_.next_double() < 0.5) {
      state_ = {-0.6 + 0.2 * rng_.next_double(), 0.0};
    } else {
      state_ = random_state();
    }
    ev.state_after = state_;
    return ev;
  }
  if (rng_.next_double() < 0.1) {
    state_ = random_state();
    ev.state_after = state_;
    return ev;
  }
  const int a = static_cast<int>(rng_.next_double() * 3.0);
  ev.action = static_cast<McarAction>(std::min(a, 2));
  const McarStepResult sr = mcar_step(state_, ev.action);
  ev.effective = true;
  ev.rho = mcar_target_action_prob(state_, ev.action) / 0.3;
  ev.reward = sr.reward;
  ev.discount = sr.discount;
  ev.reached_goal = sr.terminal;
  state_ = sr.next;
  ev.state_after = state_;
  return ev;
}

std::array<int, 2> TileCoding::active_features(const McarState& s) {
  auto cell = [&](int n_pos, int n_vel) {
    int i = static_cast<int>((s.position - kMcarMinPos) / (kMcarMaxPos - kMcarMinPos) * n_pos);
    int j = static_cast<int>((s.velocity + kMcarMaxVel) / (2.0 * kMcarMaxVel) * n_vel);
    i = std::clamp(i, 0, n_pos - 1);
    j = std::clamp(j, 0, n_vel - 1);
    return i * n_vel + j;
  };
  return {cell(8, 8), 64 + cell(9, 9)};
}

std::pair<int, int> McarGrid::nearest(const McarState& s) {
  int ix = static_cast<int>(std::lround((s.position - kMcarMinPos) / 0.01));
  int iv = static_cast<int>(std::lround((s.velocity + kMcarMaxVel) / 0.001));
  ix = std::clamp(ix, 0, kNx - 1);
  iv = std::clamp(iv, 0, kNv - 1);
  return {ix, iv};
}

Vector mcar_visit_weights(long effective_iters, std::uint64_t seed) {
  McarBehaviorProcess proc(seed);
  std::vector<long> counts(McarGrid::size(), 0);
  long done = 0;
  while (done < effective_iters) {
    const McarBehaviorEvent ev = proc.step();
    if (!ev.effective) continue;
    const auto [ix, iv] = McarGrid::nearest(ev.state_before);
    ++counts[McarGrid::index(ix, iv)];
    ++done;
  }
  // Visits to the boundary point (-1.2, 0) are an artifact of the wall.
  counts[McarGrid::index(0, McarGrid::kNv / 2)] = 0;
  double total = 0;
  for (long c : counts) total += c;
  Vector w(McarGrid::size(), 0.0);
  for (int i = 0; i < McarGrid::size(); ++i) w[i] = counts[i] / total;
  return w;
}

namespace {

double rollout_value(const McarState& start, RngStream& rng, long horizon_cap) {
  if (mcar_terminal(start)) return 0.0;
  McarState s = start;
  double total = 0.0;
  for (long t = 0; t < horizon_cap; ++t) {
    const McarAction a = mcar_target_action(s, rng);
    const McarStepResult r = mcar_step(s, a);
    total += r.reward;
    if (r.terminal) break;
    s = r.next;
  }
  return total;
}

}  // namespace

Vector mcar_reference_values(int rollouts_per_point, std::uint64_t seed, long horizon_cap,
                             int n_threads) {
  Vector v(McarGrid::size(), 0.0);
  const int total_points = McarGrid::size();
  n_threads = std::max(1, n_threads);
  auto worker = [&](int begin, int end) {
    for (int p = begin; p < end; ++p) {
      const McarState start = McarGrid::point(p / McarGrid::kNv, p % McarGrid::kNv);
      RngStream rng(seed + p, RngStreamId::kRollout);
      double acc = 0.0;
      for (int k = 0; k < rollouts_per_point; ++k) acc += rollout_value(start, rng, horizon_cap);
      v[p] = acc / rollouts_per_point;
    }
  };
  if (n_threads == 1) {
    worker(0, total_points);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (total_points + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back(worker, t * chunk, std::min(total_points, (t + 1) * chunk));
    for (auto& th : pool) th.join();
  }
  return v;
}

double mcar_weighted_error(const Vector& v, const Vector& v_ref, const Vector& weights) {
  double s = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - v_ref[i];
    s += weights[i] * d * d;
  }
  return std::sqrt(s);
}

double mcar_termination_fraction(int trials, long horizon, std::uint64_t seed) {
  int ok = 0;
  RngStream starts(seed, RngStreamId::kInit);
  for (int k = 0; k < trials; ++k) {
    McarState s{kMcarMinPos + (kMcarMaxPos - kMcarMinPos) * starts.next_double(),
                -kMcarMaxVel + 2.0 * kMcarMaxVel * starts.next_double()};
    RngStream rng(seed + k, RngStreamId::kRollout);
    if (mcar_terminal(s)) {
      ++ok;
      continue;
    }
    for (long t = 0; t < horizon; ++t) {
      const McarStepResult r = mcar_step(s, mcar_target_action(s, rng));
      if (r.terminal) {
        ++ok;
        break;
      }
      s = r.next;
    }
  }
  return static_cast<double>(ok) / trials;
}

}  // namespace gbetd
