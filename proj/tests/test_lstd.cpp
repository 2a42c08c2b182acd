#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "gbetd/bellman.hpp"
#include "gbetd/environments.hpp"
#include "gbetd/lstd.hpp"
#include "gbetd/trace.hpp"

using namespace gbetd;

namespace {

std::vector<TransitionRecord> sample_records(long n, std::uint64_t seed,
                                             const SchemePtr& scheme) {
  const MdpFile toy = build_toy();
  TraceRunConfig rc;
  rc.seed = seed;
  TraceProcess proc(toy.mdp, toy.features, scheme, rc);
  std::vector<TransitionRecord> recs;
  recs.reserve(n);
  for (long t = 0; t < n; ++t) recs.push_back(proc.step());
  return recs;
}

}  // namespace

TEST_CASE("zero-ratio records leave the averages at zero") {
  LstdAccumulator acc(2);
  TransitionRecord rec;
  rec.trace_prev = {1.0, 2.0};
  rec.rho_prev = 0.0;
  rec.reward_prev = 5.0;
  rec.gamma_t = 0.9;
  rec.s_prev = 0;
  rec.s_next = 1;
  FeatureMap f = make_feature_map(Matrix::identity(2));
  for (int i = 0; i < 10; ++i) acc.accumulate(rec, f);
  CHECK(acc.a_matrix().max_abs() == 0.0);
  CHECK(norm_inf(acc.b_vector()) == 0.0);
}

TEST_CASE("single-record average is the outer product") {
  FeatureMap f = make_feature_map(Matrix::identity(2));
  LstdAccumulator acc(2);
  TransitionRecord rec;
  rec.s_prev = 0;
  rec.s_next = 1;
  rec.trace_prev = f.phi.row(0);
  rec.rho_prev = 1.5;
  rec.gamma_t = 0.9;
  rec.reward_prev = 2.0;
  acc.accumulate(rec, f);
  // a = rho * phi(0) (gamma phi(1) - phi(0))^T
  CHECK(acc.a_matrix()(0, 0) == doctest::Approx(-1.5));
  CHECK(acc.a_matrix()(0, 1) == doctest::Approx(1.5 * 0.9));
  CHECK(acc.a_matrix()(1, 0) == 0.0);
  CHECK(acc.b_vector()[0] == doctest::Approx(3.0));
}

TEST_CASE("componentwise truncation clamps the trace before use") {
  FeatureMap f = make_feature_map(Matrix::identity(2));
  LstdAccumulator acc(2, 50.0);
  TransitionRecord rec;
  rec.s_prev = 0;
  rec.s_next = 1;
  rec.trace_prev = {120.0, -80.0};
  rec.rho_prev = 1.0;
  rec.gamma_t = 0.0;
  rec.reward_prev = 1.0;
  acc.accumulate(rec, f);
  CHECK(acc.b_vector()[0] == doctest::Approx(50.0));
  CHECK(acc.b_vector()[1] == doctest::Approx(-50.0));
  CHECK_THROWS_AS(LstdAccumulator(2, -1.0), std::invalid_argument);
}

TEST_CASE("solve: zero offset gives the zero solution; empty accumulator throws") {
  FeatureMap f = make_feature_map(Matrix::identity(2));
  LstdAccumulator acc(2);
  CHECK_THROWS_AS(acc.solve(), std::invalid_argument);
  TransitionRecord rec;
  rec.s_prev = 0;
  rec.s_next = 1;
  rec.trace_prev = {1.0, 0.5};
  rec.rho_prev = 1.0;
  rec.gamma_t = 0.5;
  rec.reward_prev = 0.0;
  acc.accumulate(rec, f);
  rec.s_prev = 1;
  rec.s_next = 0;
  rec.trace_prev = {0.25, 1.0};
  acc.accumulate(rec, f);
  const LstdSolution sol = acc.solve();
  CHECK(norm2(sol.theta) == doctest::Approx(0.0));
  CHECK_FALSE(sol.least_squares_fallback);
}

TEST_CASE("algebraic identity: A theta + b equals the direct delta average") {
  const MdpFile toy = build_toy();
  const auto recs = sample_records(20000, 31, make_scaling_scheme(21, 50.0));
  LstdAccumulator acc(5);
  for (const auto& rec : recs) acc.accumulate(rec, toy.features);

  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 5; ++rep) {
    Vector theta(5);
    for (double& x : theta) x = normal(gen);
    const Vector v = toy.features.phi * theta;

    Vector direct(5, 0.0);
    for (const auto& rec : recs) {
      const double delta =
          rec.rho_prev * (rec.reward_prev + rec.gamma_t * v[rec.s_next] - v[rec.s_prev]);
      axpy(delta / recs.size(), rec.trace_prev, direct);
    }
    Vector lhs = acc.a_matrix() * theta;
    axpy(1.0, acc.b_vector(), lhs);
    const double scale = std::max(1.0, norm2(direct));
    CHECK(norm2(lhs - direct) / scale < 1e-10);
  }
}

TEST_CASE("averages are permutation-invariant over the record multiset") {
  const MdpFile toy = build_toy();
  auto recs = sample_records(3000, 8, make_retrace_scheme(21, 1.0));
  LstdAccumulator forward(5);
  for (const auto& rec : recs) forward.accumulate(rec, toy.features);
  std::mt19937_64 gen(17);
  std::shuffle(recs.begin(), recs.end(), gen);
  LstdAccumulator shuffled(5);
  for (const auto& rec : recs) shuffled.accumulate(rec, toy.features);

  Matrix diff = forward.a_matrix();
  diff -= shuffled.a_matrix();
  CHECK(diff.max_abs() < 1e-12);
  CHECK(norm_inf(forward.b_vector() - shuffled.b_vector()) < 1e-12);
}

TEST_CASE("merging sharded accumulators matches a single pass") {
  const MdpFile toy = build_toy();
  const auto recs = sample_records(5000, 21, make_scaling_scheme(21, 30.0));
  LstdAccumulator whole(5);
  LstdAccumulator part1(5), part2(5);
  for (size_t i = 0; i < recs.size(); ++i) {
    whole.accumulate(recs[i], toy.features);
    (i < 1700 ? part1 : part2).accumulate(recs[i], toy.features);
  }
  part1.merge(part2);
  CHECK(part1.count() == whole.count());
  Matrix diff = part1.a_matrix();
  diff -= whole.a_matrix();
  CHECK(diff.max_abs() < 1e-12);
}

TEST_CASE("LSTD(0) approaches the projected one-step solution") {
  const MdpFile toy = build_toy();
  const Vector v_pi = value_function(toy.mdp);
  const Vector zeta = behavior_stationary_dist(toy.mdp);
  const BellmanOperator op = one_step_operator(toy.mdp);
  const Vector theta_ref = projected_solution(op, toy.features, zeta, v_pi).theta_td;

  TraceRunConfig rc;
  rc.seed = 4;
  TraceProcess proc(toy.mdp, toy.features, make_constant_lambda(0.0), rc);
  LstdAccumulator acc(5);
  for (long t = 0; t < 300000; ++t) acc.accumulate(proc.step(), toy.features);
  const LstdSolution sol = acc.solve();
  CHECK(norm2(sol.theta - theta_ref) / norm2(theta_ref) < 0.05);
}

TEST_CASE("two disjoint runs agree better as they lengthen") {
  const MdpFile toy = build_toy();
  const SchemePtr scheme = make_scaling_scheme(21, 50.0);
  auto coeff_gap = [&](long steps, std::uint64_t s1, std::uint64_t s2) {
    LstdAccumulator a1(5), a2(5);
    TraceRunConfig rc1, rc2;
    rc1.seed = s1;
    rc2.seed = s2;
    TraceProcess p1(toy.mdp, toy.features, scheme, rc1);
    TraceProcess p2(toy.mdp, toy.features, scheme, rc2);
    for (long t = 0; t < steps; ++t) {
      a1.accumulate(p1.step(), toy.features);
      a2.accumulate(p2.step(), toy.features);
    }
    Matrix diff = a1.a_matrix();
    diff -= a2.a_matrix();
    return diff.max_abs();
  };
  const double gap_short = coeff_gap(10000, 100, 200);
  const double gap_long = coeff_gap(160000, 100, 200);
  CHECK(gap_long < gap_short);
}

TEST_CASE("solution metrics") {
  const MdpFile toy = build_toy();
  const Vector zeta = behavior_stationary_dist(toy.mdp);
  const Vector theta_ref{1.0, -2.0, 0.5, 0.25, 3.0};
  const Vector v_ref = toy.features.phi * theta_ref;

  SUBCASE("self comparison is exactly zero") {
    const SolutionMetrics m = solution_metrics(theta_ref, theta_ref, toy.features, v_ref, zeta);
    CHECK(m.param_distance == 0.0);
    CHECK(m.value_error == 0.0);
  }
  SUBCASE("doubling a representable value function gives error 1") {
    const Vector theta2 = scaled(theta_ref, 2.0);
    const SolutionMetrics m = solution_metrics(theta2, theta_ref, toy.features, v_ref, zeta);
    CHECK(m.value_error == doctest::Approx(1.0));
  }
  SUBCASE("zero-norm reference is rejected") {
    CHECK_THROWS_AS(
        solution_metrics(theta_ref, Vector(5, 0.0), toy.features, v_ref, zeta),
        std::invalid_argument);
  }
}
