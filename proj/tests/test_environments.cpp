#include <cmath>

#include "doctest.h"
#include "gbetd/diagnostics.hpp"
#include "gbetd/environments.hpp"
#include "gbetd/mdp.hpp"

using namespace gbetd;

TEST_CASE("toy fixture: central row and row sums") {
  const MdpFile toy = build_toy();
  for (int g = 0; g < 4; ++g) {
    CHECK(toy.mdp.p_target(0, 1 + 5 * g) == 0.25);
    CHECK(toy.mdp.p_behavior(0, 1 + 5 * g) == 0.25);
  }
  for (int s = 0; s < 21; ++s) {
    double pt = 0, pb = 0;
    for (int t = 0; t < 21; ++t) {
      pt += toy.mdp.p_target(s, t);
      pb += toy.mdp.p_behavior(s, t);
    }
    CHECK(pt == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pb == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(validate(toy.mdp).all_ok());
  CHECK(toy.features.column_rank == 5);
}

TEST_CASE("toy fixture: group cycle multiplies ratios and discounts above 1") {
  const MdpFile toy = build_toy();
  const CycleReport rep = cycle_unboundedness_check(toy.mdp, 1.0);
  CHECK(rep.max_product == doctest::Approx(std::pow(1.6, 4) * std::pow(0.9, 6)));
  CHECK(rep.max_product > 1.0);
}

TEST_CASE("toy fixture: rewards sit on group middles with north/south signs") {
  const MdpFile toy = build_toy();
  const Vector r_pi = toy.mdp.expected_reward();
  CHECK(r_pi[kToyNortheastMiddle] == doctest::Approx(1.0));
  CHECK(r_pi[1 + 5 * 3 + 2] == doctest::Approx(1.0));   // NW middle
  CHECK(r_pi[1 + 5 * 1 + 2] == doctest::Approx(-1.0));  // SE middle
  CHECK(r_pi[1 + 5 * 2 + 2] == doctest::Approx(-1.0));  // SW middle
  double total_abs = 0;
  for (double r : r_pi) total_abs += std::abs(r);
  CHECK(total_abs == doctest::Approx(4.0));
}

TEST_CASE("toy fixture: four-fold symmetry under group rotation") {
  const MdpFile toy = build_toy();
  auto rotate = [](int s) {
    if (s == 0) return 0;
    const int g = (s - 1) / 5, i = (s - 1) % 5;
    return 1 + 5 * ((g + 1) % 4) + i;
  };
  for (int s = 0; s < 21; ++s)
    for (int t = 0; t < 21; ++t) {
      CHECK(toy.mdp.p_target(rotate(s), rotate(t)) == toy.mdp.p_target(s, t));
      CHECK(toy.mdp.p_behavior(rotate(s), rotate(t)) == toy.mdp.p_behavior(s, t));
    }
  const Vector zeta = behavior_stationary_dist(toy.mdp);
  for (int s = 1; s < 21; ++s)
    CHECK(zeta[rotate(s)] == doctest::Approx(zeta[s]).epsilon(1e-12));
}

TEST_CASE("bundled mdp files match the builders") {
  const MdpFile toy_file = load_mdp_file(GBETD_DATA_DIR "/toy_problem.mdp");
  const MdpFile toy = build_toy();
  Matrix d = toy_file.mdp.p_target;
  d -= toy.mdp.p_target;
  CHECK(d.max_abs() == 0.0);
  d = toy_file.mdp.reward;
  d -= toy.mdp.reward;
  CHECK(d.max_abs() == 0.0);
  d = toy_file.features.phi;
  d -= toy.features.phi;
  CHECK(d.max_abs() == 0.0);

  const MdpFile two_file = load_mdp_file(GBETD_DATA_DIR "/two_state.mdp");
  const MdpFile two = build_two_state();
  d = two_file.mdp.p_target;
  d -= two.mdp.p_target;
  CHECK(d.max_abs() == 0.0);
  CHECK(two_file.mdp.discount[0] == 0.95);
}

TEST_CASE("mountain car dynamics") {
  SUBCASE("valley bottom is a coasting equilibrium") {
    const McarState bottom{-3.14159265358979 / 6.0, 0.0};
    const McarStepResult r = mcar_step(bottom, McarAction::kCoast);
    CHECK(std::abs(r.next.velocity) < 1e-12);
    CHECK(r.reward == 0.0);
  }
  SUBCASE("forward action applies thrust minus gravity") {
    const McarStepResult r = mcar_step({-0.5, 0.0}, McarAction::kForward);
    CHECK(r.next.velocity == doctest::Approx(0.001 - 0.0025 * std::cos(-1.5)));
    CHECK(r.reward == -1.0);
  }
  SUBCASE("back action costs 1.5") {
    CHECK(mcar_step({-0.5, 0.0}, McarAction::kBack).reward == -1.5);
  }
  SUBCASE("reaching the destination terminates with discount 0") {
    const McarStepResult r = mcar_step({0.499, 0.07}, McarAction::kForward);
    CHECK(r.terminal);
    CHECK(r.discount == 0.0);
    CHECK(mcar_terminal(r.next));
    CHECK_THROWS_AS(mcar_step(r.next, McarAction::kCoast), std::domain_error);
  }
  SUBCASE("the back wall clamps position and zeroes velocity") {
    const McarStepResult r = mcar_step({-1.199, -0.07}, McarAction::kBack);
    CHECK(r.next.position == -1.2);
    CHECK(r.next.velocity == 0.0);
  }
}

TEST_CASE("mountain car target policy") {
  RngStream rng(3, RngStreamId::kScratch);
  SUBCASE("coasts beyond the back hill") {
    CHECK(mcar_target_action({-1.05, 0.03}, rng) == McarAction::kCoast);
    CHECK(mcar_target_action_prob({-1.05, 0.03}, McarAction::kCoast) == 1.0);
  }
  SUBCASE("accelerates with the motion") {
    CHECK(mcar_target_action({-0.3, 0.02}, rng) == McarAction::kForward);
    CHECK(mcar_target_action({-0.3, -0.02}, rng) == McarAction::kBack);
    CHECK(mcar_target_action_prob({-0.3, 0.02}, McarAction::kForward) == 1.0);
  }
  SUBCASE("randomizes at near-zero velocity") {
    CHECK(mcar_target_action_prob({-0.3, 0.0}, McarAction::kForward) == 0.5);
    CHECK(mcar_target_action_prob({-0.3, 0.0}, McarAction::kBack) == 0.5);
    CHECK(mcar_target_action_prob({-0.3, 0.0}, McarAction::kCoast) == 0.0);
  }
}

TEST_CASE("mountain car behavior process marks jumps ineffective and weights actions") {
  McarBehaviorProcess proc(5);
  long effective = 0, ineffective = 0, goals = 0;
  for (int t = 0; t < 20000; ++t) {
    const McarBehaviorEvent ev = proc.step();
    if (!ev.effective) {
      ++ineffective;
      continue;
    }
    ++effective;
    goals += ev.reached_goal ? 1 : 0;
    // rho is the target action probability over the uniform 0.3.
    const double expected = mcar_target_action_prob(ev.state_before, ev.action) / 0.3;
    CHECK(ev.rho == doctest::Approx(expected));
    CHECK(ev.rho <= 1.0 / 0.3 + 1e-12);
  }
  // Jumps happen roughly 10% of the time.
  CHECK(ineffective > 0.05 * 20000);
  CHECK(ineffective < 0.2 * 20000);
  CHECK(effective > 0);
}

TEST_CASE("tile coding activates exactly one cell per tiling") {
  RngStream rng(8, RngStreamId::kScratch);
  for (int k = 0; k < 2000; ++k) {
    const McarState s{kMcarMinPos + 1.7 * rng.next_double(),
                      -kMcarMaxVel + 0.14 * rng.next_double()};
    const auto f = TileCoding::active_features(s);
    CHECK(f[0] >= 0);
    CHECK(f[0] < 64);
    CHECK(f[1] >= 64);
    CHECK(f[1] < 145);
    CHECK(TileCoding::active_features(s) == f);  // deterministic
  }
}

TEST_CASE("grid nearest-point mapping") {
  CHECK(McarGrid::nearest({-1.2, 0.0}) == std::pair<int, int>(0, 70));
  CHECK(McarGrid::nearest({0.5, 0.07}) == std::pair<int, int>(170, 140));
  const McarState p = McarGrid::point(100, 30);
  const auto [ix, iv] = McarGrid::nearest(p);
  CHECK(ix == 100);
  CHECK(iv == 30);
}

TEST_CASE("visit weights normalize and zero the boundary artifact") {
  const Vector w = mcar_visit_weights(20000, 3);
  double sum = 0;
  for (double x : w) {
    CHECK(x >= 0.0);
    sum += x;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w[McarGrid::index(0, McarGrid::kNv / 2)] == 0.0);
}

TEST_CASE("weighted grid error") {
  Vector v(McarGrid::size(), 1.0), ref(McarGrid::size(), 0.0), w(McarGrid::size(), 0.0);
  w[5] = 0.25;
  w[6] = 0.75;
  CHECK(mcar_weighted_error(v, ref, w) == doctest::Approx(1.0));
  v[5] = 3.0;  // (3)^2*0.25 + 1*0.75 = 3
  CHECK(mcar_weighted_error(v, ref, w) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("target policy reaches the goal from almost everywhere" * doctest::timeout(300)) {
  CHECK(mcar_termination_fraction(1000, 20000, 7) >= 0.99);
}
