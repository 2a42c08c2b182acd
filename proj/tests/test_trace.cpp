#include <cmath>

#include "doctest.h"
#include "gbetd/environments.hpp"
#include "gbetd/trace.hpp"

using namespace gbetd;

TEST_CASE("zero previous trace collapses the update to the feature vector") {
  const MdpFile toy = build_toy();
  TraceRunConfig rc;
  rc.seed = 1;
  TraceProcess proc(toy.mdp, toy.features, make_constant_lambda(0.7), rc);
  const TransitionRecord rec = proc.step();  // e_0 = 0
  for (int i = 0; i < toy.features.n_features; ++i)
    CHECK(rec.trace[i] == toy.features.phi(rec.s_next, i));
}

TEST_CASE("constant lambda=1 trace matches the unrolled discounted sum") {
  const MdpFile toy = build_toy();
  TraceRunConfig rc;
  rc.seed = 42;
  TraceProcess proc(toy.mdp, toy.features, make_constant_lambda(1.0), rc);

  std::vector<TransitionRecord> recs;
  for (int t = 0; t < 60; ++t) recs.push_back(proc.step());

  // Straight-line reference: e_t = sum_k gamma^{t-k} (prod_i rho_i) phi(S_k).
  const double gamma = 0.9;
  for (int t : {5, 17, 59}) {
    Vector ref(toy.features.n_features, 0.0);
    for (int k = 0; k <= t; ++k) {
      double w = std::pow(gamma, t - k);
      for (int i = k + 1; i <= t; ++i) w *= recs[i].rho_prev;
      axpy(w, toy.features.phi.row(recs[k].s_next), ref);
    }
    for (int i = 0; i < toy.features.n_features; ++i)
      CHECK(recs[t].trace[i] == doctest::Approx(ref[i]).epsilon(1e-10));
  }
}

TEST_CASE("scaling scheme keeps traces inside the guaranteed ball") {
  const MdpFile toy = build_toy();
  const double c = 50.0;
  const double bound = c + toy.features.max_feature_norm();
  TraceRunConfig rc;
  rc.seed = 3;
  TraceProcess proc(toy.mdp, toy.features, make_scaling_scheme(toy.mdp.n_states, c), rc);
  double max_norm = 0.0;
  for (long t = 0; t < 100000; ++t) max_norm = std::max(max_norm, norm2(proc.step().trace));
  CHECK(max_norm <= bound + 1e-9);
  CHECK(max_norm > c);  // the bound is actually exercised
}

TEST_CASE("interest weighting: unit interest reproduces the plain process") {
  const MdpFile toy = build_toy();
  const SchemePtr scheme = make_scaling_scheme(toy.mdp.n_states, 50.0);
  TraceRunConfig plain;
  plain.seed = 7;
  TraceRunConfig weighted = plain;
  weighted.interest = [](int) { return 1.0; };
  TraceProcess a(toy.mdp, toy.features, scheme, plain);
  TraceProcess b(toy.mdp, toy.features, scheme, weighted);
  for (int t = 0; t < 500; ++t) {
    const TransitionRecord ra = a.step();
    const TransitionRecord rb = b.step();
    CHECK(ra.s_next == rb.s_next);
    for (int i = 0; i < toy.features.n_features; ++i) CHECK(ra.trace[i] == rb.trace[i]);
  }
}

TEST_CASE("interest weighting: zero interest decays the trace geometrically") {
  const MdpFile toy = build_toy();
  TraceRunConfig rc;
  rc.seed = 7;
  rc.initial_trace = Vector{10, 10, 10, 10, 10};
  rc.interest = [](int) { return 0.0; };
  TraceProcess proc(toy.mdp, toy.features, make_scaling_scheme(toy.mdp.n_states, 50.0), rc);
  double prev = norm2(rc.initial_trace);
  for (int t = 0; t < 2000; ++t) prev = norm2(proc.step().trace);
  CHECK(prev < 1e-8);
}

TEST_CASE("interest weighting: indicator interest masks increments") {
  const MdpFile toy = build_toy();
  const int n = toy.mdp.n_states;
  // Pair-coded memory (huge threshold never binds, so lambda stays at beta).
  const SchemePtr scheme = make_scaling_scheme(n, 1e9, 0.5);
  // Flag only memory states whose current state is the central one.
  auto flag = [n](int y) { return y % n == kToyCentralState ? 1.0 : 0.0; };
  TraceRunConfig rc;
  rc.seed = 12;
  rc.interest = flag;
  TraceProcess masked(toy.mdp, toy.features, scheme, rc);
  TraceRunConfig rc2;
  rc2.seed = 12;
  TraceProcess plain(toy.mdp, toy.features, scheme, rc2);

  // Replay oracle: recompute the masked trace from the plain record stream.
  Vector ref(toy.features.n_features, 0.0);
  for (int t = 0; t < 2000; ++t) {
    const TransitionRecord rp = plain.step();
    const TransitionRecord rm = masked.step();
    REQUIRE(rp.s_next == rm.s_next);
    const double mult = rm.lambda_t * rp.gamma_t * rp.rho_prev;
    for (int i = 0; i < toy.features.n_features; ++i)
      ref[i] = mult * ref[i] +
               (rp.s_next == kToyCentralState ? toy.features.phi(rp.s_next, i) : 0.0);
    for (int i = 0; i < toy.features.n_features; ++i)
      CHECK(rm.trace[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("interest weighting rejects negative values") {
  const MdpFile toy = build_toy();
  TraceRunConfig rc;
  rc.seed = 1;
  rc.interest = [](int) { return -1.0; };
  TraceProcess proc(toy.mdp, toy.features, make_constant_lambda(0.5), rc);
  CHECK_THROWS_AS(proc.step(), std::invalid_argument);
}

TEST_CASE("composite with one block reproduces the single-scheme trace") {
  const MdpFile toy = build_toy();
  const SchemePtr scheme = make_scaling_scheme(toy.mdp.n_states, 50.0);
  TraceRunConfig rc;
  rc.seed = 4;
  TraceProcess single(toy.mdp, toy.features, scheme, rc);
  CompositeTraceProcess composite(toy.mdp, toy.features, {scheme},
                                  make_partition(std::vector<int>(21, 0)), rc);
  for (int t = 0; t < 1000; ++t) {
    const TransitionRecord rs = single.step();
    const TransitionRecord rcmp = composite.step();
    CHECK(rs.s_next == rcmp.s_next);
    for (int i = 0; i < toy.features.n_features; ++i)
      CHECK(rcmp.trace[i] == doctest::Approx(rs.trace[i]).epsilon(1e-12));
  }
}

TEST_CASE("composite with identical constant blocks sums to the single trace") {
  const MdpFile toy = build_toy();
  const SchemePtr lam = make_constant_lambda(0.8);
  std::vector<int> part(21, 0);
  for (int s = 11; s < 21; ++s) part[s] = 1;
  TraceRunConfig rc;
  rc.seed = 4;
  TraceProcess single(toy.mdp, toy.features, lam, rc);
  CompositeTraceProcess composite(toy.mdp, toy.features, {lam, lam}, make_partition(part), rc);
  for (int t = 0; t < 1000; ++t) {
    const TransitionRecord rs = single.step();
    const TransitionRecord rcmp = composite.step();
    REQUIRE(rs.s_next == rcmp.s_next);
    for (int i = 0; i < toy.features.n_features; ++i)
      CHECK(rcmp.trace[i] == doctest::Approx(rs.trace[i]).epsilon(1e-12));
  }
}

TEST_CASE("composite lambda=0 block holds only the current feature") {
  const MdpFile toy = build_toy();
  std::vector<int> part(21, 0);  // block 0: lambda = 1
  for (int s = 11; s < 21; ++s) part[s] = 1;  // block 1: lambda = 0
  CompositeTraceProcess composite(toy.mdp, toy.features,
                                  {make_constant_lambda(1.0), make_constant_lambda(0.0)},
                                  make_partition(part), {.seed = 9});
  for (int t = 0; t < 2000; ++t) {
    const TransitionRecord rec = composite.step();
    const Vector& e0 = composite.block_trace(1);
    for (int i = 0; i < toy.features.n_features; ++i) {
      const double expected = part[rec.s_next] == 1 ? toy.features.phi(rec.s_next, i) : 0.0;
      CHECK(e0[i] == expected);
    }
  }
}

TEST_CASE("composite summed-trace linearity") {
  const MdpFile toy = build_toy();
  std::vector<int> part(21, 0);
  for (int s = 1; s < 21; s += 2) part[s] = 1;
  CompositeTraceProcess composite(
      toy.mdp, toy.features,
      {make_scaling_scheme(21, 25.0), make_constant_lambda(0.5)}, make_partition(part),
      {.seed = 13});
  for (int t = 0; t < 500; ++t) {
    const TransitionRecord rec = composite.step();
    Vector sum = composite.block_trace(0);
    axpy(1.0, composite.block_trace(1), sum);
    for (int i = 0; i < toy.features.n_features; ++i) CHECK(rec.trace[i] == sum[i]);
  }
}

TEST_CASE("composite rejects bad partitions") {
  const MdpFile toy = build_toy();
  CHECK_THROWS_AS(CompositeTraceProcess(toy.mdp, toy.features, {make_constant_lambda(1.0)},
                                        make_partition(std::vector<int>(5, 0)), {.seed = 1}),
                  std::invalid_argument);
}

TEST_CASE("coupling: identical initialization stays at zero deviation") {
  const MdpFile toy = build_toy();
  const Vector e0(5, 1.0);
  const CouplingResult res = coupling_experiment(
      toy.mdp, toy.features, make_scaling_scheme(21, 50.0), e0, e0, 1000, 5);
  CHECK(res.final_deviation == 0.0);
  for (double d : res.deviations) CHECK(d == 0.0);
}

TEST_CASE("coupling: deviation contracts and obeys the per-step bound") {
  const MdpFile toy = build_toy();
  Vector e0(5, 0.0);
  Vector e0_hat(5, 0.0);
  e0_hat[0] = 10.0;  // Delta_0 = 10
  const CouplingResult res = coupling_experiment(
      toy.mdp, toy.features, make_scaling_scheme(21, 50.0), e0, e0_hat, 100000, 5);
  CHECK(res.deviations[0] == doctest::Approx(10.0));
  CHECK(res.final_deviation < 1e-6);
  CHECK(res.per_step_bound_ok);
  CHECK(res.pathwise_bound_ok);
}

TEST_CASE("trace statistics: bounded scheme has no excursions") {
  const MdpFile toy = build_toy();
  TraceRunConfig rc;
  rc.seed = 2;
  TraceProcess proc(toy.mdp, toy.features, make_scaling_scheme(21, 50.0), rc);
  std::vector<double> norms;
  for (int t = 0; t < 50000; ++t) norms.push_back(norm2(proc.step().trace));
  const TraceStats st = compute_trace_stats(norms, 100.0);
  CHECK(st.excursions_counted == 0);
  CHECK(st.max_norm <= 51.0 + 1e-9);
}

TEST_CASE("trace statistics: tail fraction is non-increasing") {
  std::vector<double> norms;
  for (int t = 0; t < 1000; ++t) norms.push_back(std::abs(std::sin(0.1 * t)) * 120.0);
  const TraceStats st = compute_trace_stats(norms, 100.0);
  for (size_t i = 1; i < st.tail_frac.size(); ++i) CHECK(st.tail_frac[i] <= st.tail_frac[i - 1]);
}

TEST_CASE("trace statistics: excursions bucket by length") {
  // 14 steps outside the ball, then inside, then 12 outside.
  std::vector<double> norms;
  auto push = [&](int n, double v) {
    for (int i = 0; i < n; ++i) norms.push_back(v);
  };
  push(14, 200.0);
  push(5, 1.0);
  push(12, 150.0);
  push(3, 1.0);
  push(4, 300.0);  // too short to count
  const TraceStats st = compute_trace_stats(norms, 100.0, 10, 5.0);
  CHECK(st.excursions_counted == 2);
  long total = 0;
  for (long c : st.excursion_bin_count) total += c;
  CHECK(total == 2);
}

TEST_CASE("optional reward noise is zero-mean and off by default") {
  const MdpFile toy = build_toy();
  const SchemePtr scheme = make_constant_lambda(0.5);
  TraceRunConfig plain;
  plain.seed = 33;
  TraceRunConfig noisy = plain;
  noisy.reward_noise_std = 0.5;
  TraceProcess a(toy.mdp, toy.features, scheme, plain);
  TraceProcess b(toy.mdp, toy.features, scheme, noisy);
  double noise_sum = 0;
  long diff_count = 0;
  const long steps = 20000;
  for (long t = 0; t < steps; ++t) {
    const TransitionRecord ra = a.step();
    const TransitionRecord rb = b.step();
    REQUIRE(ra.s_next == rb.s_next);  // noise does not disturb the state stream
    if (ra.reward_prev != rb.reward_prev) ++diff_count;
    noise_sum += rb.reward_prev - ra.reward_prev;
  }
  CHECK(diff_count == steps);
  CHECK(std::abs(noise_sum / steps) < 3.0 * 0.5 / std::sqrt(static_cast<double>(steps)));
}

TEST_CASE("identical seed and config give bit-identical record streams") {
  const MdpFile toy = build_toy();
  const SchemePtr scheme = make_scaling_scheme(21, 50.0);
  TraceRunConfig rc;
  rc.seed = 77;
  TraceProcess a(toy.mdp, toy.features, scheme, rc);
  TraceProcess b(toy.mdp, toy.features, scheme, rc);
  for (int t = 0; t < 5000; ++t) {
    const TransitionRecord ra = a.step();
    const TransitionRecord rb = b.step();
    CHECK(ra.s_next == rb.s_next);
    CHECK(ra.lambda_t == rb.lambda_t);
    CHECK(ra.reward_prev == rb.reward_prev);
    for (int i = 0; i < 5; ++i) CHECK(ra.trace[i] == rb.trace[i]);
  }
}
