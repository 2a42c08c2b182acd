#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "gbetd/linalg.hpp"
#include "gbetd/mdp.hpp"
#include "gbetd/rng.hpp"

namespace gbetd {

// ---------------------------------------------------------------------------
// 21-state benchmark: one central state plus four symmetric 5-state groups.
// Group g occupies states 1+5g .. 5+5g; the central state is 0. Features are
// the five aggregation indicators (central, then one per group).
// ---------------------------------------------------------------------------

MdpFile build_toy();

/// Two-state cycle with gamma = 0.95, zero rewards, on-policy behavior and
/// features [[3,1],[1,1]] -- the projected-equation counterexample fixture.
MdpFile build_two_state();

// States monitored in the trace-distribution experiments.
inline constexpr int kToyCentralState = 0;
inline constexpr int kToyNortheastMiddle = 3;  // middle of group 0
inline constexpr int kToySoutheastFirst = 6;   // first state of group 1

// ---------------------------------------------------------------------------
// Mountain Car: position in [-1.2, 0.5], velocity in [-0.07, 0.07].
// Rewards depend on the action only: back -1.5, coast 0, forward -1.
// Undiscounted, except discount 0 at the destination (position 0.5), which
// ends the episode.
// ---------------------------------------------------------------------------

struct McarState {
  double position = 0;
  double velocity = 0;
};

enum class McarAction : int { kBack = 0, kCoast = 1, kForward = 2 };

inline constexpr double kMcarMinPos = -1.2;
inline constexpr double kMcarMaxPos = 0.5;
inline constexpr double kMcarMaxVel = 0.07;
inline constexpr double kMcarActionReward[3] = {-1.5, 0.0, -1.0};

bool mcar_terminal(const McarState& s);

struct McarStepResult {
  McarState next;
  double reward = 0;
  double discount = 1;  // gamma(next)
  bool terminal = false;
};

/// Standard dynamics; throws std::domain_error when stepped at the destination.
McarStepResult mcar_step(const McarState& s, McarAction a);

/// Energy-pumping target policy: coast beyond the back hill, random direction
/// at near-zero speed, otherwise accelerate with the current motion.
McarAction mcar_target_action(const McarState& s, RngStream& rng);
double mcar_target_action_prob(const McarState& s, McarAction a);

struct McarBehaviorEvent {
  bool effective = false;  // a real action was taken (not a jump/restart)
  McarAction action = McarAction::kCoast;
  McarState state_before;
  McarState state_after;
  double rho = 0;       // target-action probability / 0.3 (effective steps only)
  double reward = 0;    // effective steps only
  double discount = 1;  // gamma(state_after)
  bool reached_goal = false;
};

/// Random behavior: 90% uniform action, 10% jump to a uniformly random state;
/// restarts from the destination either near the valley bottom or uniformly,
/// with equal probability.
class McarBehaviorProcess {
 public:
  explicit McarBehaviorProcess(std::uint64_t seed);
  McarBehaviorEvent step();
  const McarState& state() const { return state_; }

 private:
  McarState random_state();
  McarState state_;
  RngStream rng_;
};

/// Two even tilings (8x8 and 9x9) of the state rectangle; 145 binary
/// features, exactly two active per state.
class TileCoding {
 public:
  static constexpr int kNumFeatures = 64 + 81;
  static std::array<int, 2> active_features(const McarState& s);
};

// Evaluation grid of 171 x 141 points, spacing 0.01 in position and 0.001 in
// velocity.
struct McarGrid {
  static constexpr int kNx = 171;
  static constexpr int kNv = 141;
  static constexpr int size() { return kNx * kNv; }
  static int index(int ix, int iv) { return ix * kNv + iv; }
  static McarState point(int ix, int iv) {
    return {kMcarMinPos + 0.01 * ix, -kMcarMaxVel + 0.001 * iv};
  }
  static std::pair<int, int> nearest(const McarState& s);
};

/// State-visit weights over the grid from a behavior run of the given number
/// of effective iterations; the boundary point (-1.2, 0) is zeroed and the
/// rest normalized to sum 1.
Vector mcar_visit_weights(long effective_iters, std::uint64_t seed);

/// Rollout estimate of the target policy's value at every grid point.
Vector mcar_reference_values(int rollouts_per_point, std::uint64_t seed,
                             long horizon_cap = 20000, int n_threads = 1);

double mcar_weighted_error(const Vector& v, const Vector& v_ref, const Vector& weights);

/// Fraction of target-policy episodes (seeded starts across the state space)
/// that terminate within the horizon. Fixture health check.
double mcar_termination_fraction(int trials, long horizon, std::uint64_t seed);

}  // namespace gbetd
