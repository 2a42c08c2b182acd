#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "gbetd/diagnostics.hpp"
#include "gbetd/environments.hpp"
#include "gbetd/trace.hpp"

using namespace gbetd;

namespace {

std::vector<std::vector<Vector>> samples_by_state(const TabularMdp& mdp,
                                                  const FeatureMap& features,
                                                  const SchemePtr& scheme, long steps,
                                                  std::uint64_t seed, Vector e0 = {}) {
  std::vector<std::vector<Vector>> by_state(mdp.n_states);
  TraceRunConfig rc;
  rc.seed = seed;
  rc.initial_trace = std::move(e0);
  TraceProcess proc(mdp, features, scheme, rc);
  for (long t = 0; t < steps; ++t) {
    const TransitionRecord rec = proc.step();
    by_state[rec.s_next].push_back(rec.trace);
  }
  return by_state;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) ++i;
    else ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("characteristic-function estimates stay inside the unit disk") {
  const MdpFile toy = build_toy();
  const CharFnProbe probe = CharFnProbe::make(5, 42);
  CHECK(probe.points.rows() == 500);
  const auto by_state = samples_by_state(toy.mdp, toy.features,
                                         make_scaling_scheme(21, 50.0), 20000, 9);
  const auto cf = empirical_cf(by_state[kToyCentralState], probe);
  for (const auto& z : cf) CHECK(std::abs(z) <= 1.0 + 1e-12);
}

TEST_CASE("probe generation is deterministic per seed") {
  const CharFnProbe a = CharFnProbe::make(5, 1), b = CharFnProbe::make(5, 1),
                    c = CharFnProbe::make(5, 2);
  Matrix d = a.points;
  d -= b.points;
  CHECK(d.max_abs() == 0.0);
  d = a.points;
  d -= c.points;
  CHECK(d.max_abs() > 0.0);
}

TEST_CASE("deterministic cycle with lambda 0 gives point-mass trace distributions") {
  const MdpFile two = build_two_state();
  const auto by_state = samples_by_state(two.mdp, two.features,
                                         make_constant_lambda(0.0), 4000, 3);
  // Every visit to state s carries exactly phi(s).
  for (int s = 0; s < 2; ++s) {
    REQUIRE(by_state[s].size() > 100);
    for (const Vector& e : by_state[s])
      for (int i = 0; i < 2; ++i) CHECK(e[i] == two.features.phi(s, i));
    const TraceHistogram h = conditional_trace_histogram(by_state[s], 0);
    long nonzero_bins = 0;
    for (double dens : h.density) nonzero_bins += dens > 0 ? 1 : 0;
    CHECK(nonzero_bins == 1);
  }
}

TEST_CASE("unvisited states are reported") {
  CHECK_THROWS_AS(conditional_trace_histogram({}, 0), std::domain_error);
}

TEST_CASE("conditional trace distributions stabilize as the run doubles" *
          doctest::timeout(300)) {
  const MdpFile toy = build_toy();
  const SchemePtr scheme = make_scaling_scheme(21, 50.0);
  const auto half = samples_by_state(toy.mdp, toy.features, scheme, 150000, 4);
  const auto full = samples_by_state(toy.mdp, toy.features, scheme, 300000, 4);
  for (int s : {kToyCentralState, kToyNortheastMiddle, kToySoutheastFirst}) {
    std::vector<double> a, b;
    for (const Vector& e : half[s]) a.push_back(e[0]);
    for (const Vector& e : full[s]) b.push_back(e[0]);
    CHECK(ks_distance(a, b) < 0.05);
  }
}

TEST_CASE("cf convergence curve falls toward zero and is deterministic" *
          doctest::timeout(300)) {
  const MdpFile toy = build_toy();
  const CharFnProbe probe = CharFnProbe::make(5, 11);
  const auto by_state = samples_by_state(toy.mdp, toy.features,
                                         make_scaling_scheme(21, 50.0), 200000, 5);
  const auto& samples = by_state[kToySoutheastFirst];
  REQUIRE(samples.size() > 1000);
  const CfConvergenceCurve curve = cf_convergence_curve(samples, probe);
  CHECK(curve.max_difference.back() == 0.0);  // final vs itself
  // Early estimates are far from the limit, late ones close.
  CHECK(curve.max_difference.front() > curve.max_difference[curve.max_difference.size() - 2]);
  CHECK(curve.max_difference[curve.max_difference.size() - 2] < 0.2);

  const CfConvergenceCurve again = cf_convergence_curve(samples, probe);
  for (size_t i = 0; i < curve.max_difference.size(); ++i)
    CHECK(curve.max_difference[i] == again.max_difference[i]);

  CHECK_THROWS_AS(cf_convergence_curve({samples[0]}, probe), std::domain_error);
}

TEST_CASE("cross-run difference shrinks, cross-state difference persists" *
          doctest::timeout(300)) {
  const MdpFile toy = build_toy();
  const SchemePtr scheme = make_scaling_scheme(21, 50.0);
  const CharFnProbe probe = CharFnProbe::make(5, 11);
  const auto run_a = samples_by_state(toy.mdp, toy.features, scheme, 200000, 5);
  const auto run_b = samples_by_state(toy.mdp, toy.features, scheme, 200000, 6,
                                      Vector{25, -10, 5, 0, 15});
  const double cross_run =
      cf_max_difference(empirical_cf(run_a[kToySoutheastFirst], probe),
                        empirical_cf(run_b[kToySoutheastFirst], probe));
  const double cross_state =
      cf_max_difference(empirical_cf(run_a[kToySoutheastFirst], probe),
                        empirical_cf(run_a[kToyNortheastMiddle], probe));
  CHECK(cross_run < 0.1);
  CHECK(cross_state > 0.2);
}

TEST_CASE("cycle check: constant lambda 1 on the benchmark predicts unbounded traces") {
  const MdpFile toy = build_toy();
  const CycleReport rep = cycle_unboundedness_check(toy.mdp, 1.0);
  CHECK(rep.unbounded_predicted);
  CHECK(rep.max_product == doctest::Approx(3.482852).epsilon(1e-6));
  CHECK(rep.max_cycle.size() == 7);  // 6 edges through central + one group
}

TEST_CASE("cycle check: lambda 0 annihilates every product") {
  const MdpFile toy = build_toy();
  const CycleReport rep = cycle_unboundedness_check(toy.mdp, 0.0);
  CHECK(rep.max_product == 0.0);
  CHECK_FALSE(rep.unbounded_predicted);
}

TEST_CASE("cycle check: on-policy discounted chain stays bounded") {
  MdpFile toy = build_toy();
  toy.mdp.p_target = toy.mdp.p_behavior;  // rho = 1 everywhere
  const CycleReport rep = cycle_unboundedness_check(toy.mdp, 1.0);
  CHECK(rep.max_product < 1.0);
  CHECK_FALSE(rep.unbounded_predicted);
}

TEST_CASE("cycle check verdict is monotone in lambda") {
  const MdpFile toy = build_toy();
  bool unbounded_seen = false;
  for (int i = 0; i <= 10; ++i) {
    const CycleReport rep = cycle_unboundedness_check(toy.mdp, i / 10.0);
    if (unbounded_seen) CHECK(rep.unbounded_predicted);
    unbounded_seen = unbounded_seen || rep.unbounded_predicted;
  }
  CHECK(unbounded_seen);
}

TEST_CASE("cycle check with a cap below the shortest cycle errors out") {
  const MdpFile two = build_two_state();
  CHECK_THROWS_AS(cycle_unboundedness_check(two.mdp, 1.0, 1), std::domain_error);
}
