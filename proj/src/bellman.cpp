#include "gbetd/bellman.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "gbetd/environments.hpp"
#include "gbetd/rng.hpp"

namespace gbetd {

namespace {

Matrix discounted_target(const TabularMdp& mdp) {
  Matrix pg(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int t = 0; t < mdp.n_states; ++t) pg(s, t) = mdp.p_target(s, t) * mdp.discount[t];
  return pg;
}

}  // namespace

BellmanOperator one_step_operator(const TabularMdp& mdp) {
  BellmanOperator op;
  op.p_tilde = discounted_target(mdp);
  op.r_tilde = mdp.expected_reward();
  return op;
}

BellmanOperator exact_operator_transition_dependent(const TabularMdp& mdp,
                                                    const Matrix& lambda) {
  const int n = mdp.n_states;
  if (lambda.rows() != n || lambda.cols() != n)
    throw std::invalid_argument("lambda matrix dimension mismatch");
  Matrix q(n, n);
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t) {
      const double l = lambda(s, t);
      if (l < 0.0 || l > 1.0) throw std::invalid_argument("lambda outside [0,1]");
      q(s, t) = mdp.p_target(s, t) * mdp.discount[t] * l;
    }
  if (spectral_radius_power(q) >= 1.0)
    throw std::domain_error("exact operator: sigma(P Gamma Lambda) >= 1");
  Matrix i_minus_q = Matrix::identity(n);
  i_minus_q -= q;
  const LuDecomposition lu(i_minus_q);

  BellmanOperator op;
  op.r_tilde = lu.solve(mdp.expected_reward());
  Matrix pg = discounted_target(mdp);
  pg -= q;
  op.p_tilde = lu.solve(pg);
  // Roundoff can leave tiny negatives in structurally zero entries.
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t)
      if (op.p_tilde(s, t) < 0.0 && op.p_tilde(s, t) > -1e-12) op.p_tilde(s, t) = 0.0;
  return op;
}

BellmanOperator exact_operator_state_dependent(const TabularMdp& mdp, const Vector& lambda) {
  const int n = mdp.n_states;
  if (static_cast<int>(lambda.size()) != n)
    throw std::invalid_argument("lambda vector dimension mismatch");
  Matrix lam(n, n);
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t) lam(s, t) = lambda[t];  // lambda applies at the destination
  return exact_operator_transition_dependent(mdp, lam);
}

namespace {

long default_horizon(const TabularMdp& mdp, const std::optional<long>& cap) {
  if (cap) {
    if (*cap < 1) throw std::invalid_argument("mc operator: horizon cap must be >= 1");
    return *cap;
  }
  double gmax = 0.0;
  for (double g : mdp.discount) gmax = std::max(gmax, g);
  if (gmax >= 1.0)
    throw std::invalid_argument(
        "mc operator: explicit horizon cap required when some discount equals 1");
  if (gmax == 0.0) return 1;
  return static_cast<long>(std::ceil(std::log(1e-8) / std::log(gmax)));
}

double integrated_autocorr_time(const std::vector<double>& series) {
  const size_t n = series.size();
  if (n < 16) return 1.0;
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : series) var += (x - mean) * (x - mean);
  var /= n;
  if (var == 0.0) return 1.0;
  double tau = 1.0;
  const size_t max_lag = std::min<size_t>(n / 4, 2000);
  for (size_t k = 1; k < max_lag; ++k) {
    double c = 0.0;
    for (size_t t = 0; t + k < n; ++t) c += (series[t] - mean) * (series[t + k] - mean);
    c /= (n - k) * var;
    if (c <= 0.0) break;
    tau += 2.0 * c;
  }
  return tau;
}

}  // namespace

BellmanOperator mc_operator_history_dependent(const TabularMdp& mdp, const FeatureMap& features,
                                              const SchemePtr& scheme,
                                              const McOperatorConfig& config,
                                              McOperatorDiagnostics* diag) {
  const int n = mdp.n_states;
  if (config.samples_per_state < 1 || config.warmup_steps < 1)
    throw std::invalid_argument("mc operator: warmup and samples must be positive");
  const long horizon = default_horizon(mdp, config.horizon_cap);

  // Warmup behavior run: per-state reservoir of (memory, trace) pairs,
  // approximating zeta(d(y,e) | s).
  std::vector<std::vector<std::pair<int, Vector>>> bucket(n);
  std::vector<double> norm_series;
  norm_series.reserve(config.warmup_steps);
  {
    TraceRunConfig rc;
    rc.seed = config.seed;
    TraceProcess proc(mdp, features, scheme, rc);
    for (long t = 0; t < config.warmup_steps; ++t) {
      const TransitionRecord rec = proc.step();
      bucket[rec.s_next].emplace_back(proc.memory(), rec.trace);
      norm_series.push_back(norm2(rec.trace));
    }
  }
  for (int s = 0; s < n; ++s)
    if (bucket[s].empty())
      throw std::domain_error("mc operator: state " + std::to_string(s) +
                              " never visited during warmup");

  const Vector r_pi = mdp.expected_reward();
  const long k_samples = config.samples_per_state;

  Matrix p_sum(n, n), p_sumsq(n, n);
  Vector r_sum(n, 0.0), r_sumsq(n, 0.0);
  std::vector<long> truncated(n, 0);

  auto run_state = [&](int s) {
    RngStream rng(config.seed ^ (0x517cc1b727220a95ULL * (s + 1)), RngStreamId::kRollout);
    for (long k = 0; k < k_samples; ++k) {
      const auto& init = bucket[s][static_cast<size_t>(rng.next_double() * bucket[s].size()) %
                                   bucket[s].size()];
      int y = init.first;
      Vector e = init.second;
      int cur = s;
      double disc = 1.0;   // gamma_1^t
      double r_acc = 0.0;  // sum_{k<t} gamma_1^k r_pi(S_k)
      bool stopped = false;
      int stop_state = 0;
      double stop_disc = 0.0;
      for (long t = 1; t <= horizon; ++t) {
        r_acc += disc * r_pi[cur];
        const int nxt = rng.next_categorical(mdp.p_target.row_data(cur), n);
        const double rho = mdp.p_target(cur, nxt) / mdp.p_behavior(cur, nxt);
        const double g = mdp.discount[nxt];
        disc *= g;
        y = scheme->memory_step(y, nxt);
        const double lam = scheme->lambda(y, e, g, rho);
        for (int i = 0; i < features.n_features; ++i)
          e[i] = lam * g * rho * e[i] + features.phi(nxt, i);
        cur = nxt;
        if (rng.next_double() >= lam) {  // stop with probability 1 - lambda_t
          stopped = true;
          stop_state = cur;
          stop_disc = disc;
          break;
        }
        if (disc == 0.0) {  // discounting already annihilated the tail
          stopped = true;
          stop_state = cur;
          stop_disc = 0.0;
          break;
        }
      }
      if (stopped) {
        p_sum(s, stop_state) += stop_disc;
        p_sumsq(s, stop_state) += stop_disc * stop_disc;
      } else {
        ++truncated[s];
      }
      r_sum[s] += r_acc;
      r_sumsq[s] += r_acc * r_acc;
    }
  };

  const int n_threads = std::max(1, config.n_threads);
  if (n_threads == 1) {
    for (int s = 0; s < n; ++s) run_state(s);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next_state{0};
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (int s = next_state.fetch_add(1); s < n; s = next_state.fetch_add(1)) run_state(s);
      });
    for (auto& th : pool) th.join();
  }

  BellmanOperator op;
  op.provenance = BellmanOperator::Provenance::kMonteCarlo;
  op.samples_per_state = k_samples;
  op.p_tilde = Matrix(n, n);
  op.p_se = Matrix(n, n);
  op.r_tilde.assign(n, 0.0);
  op.r_se.assign(n, 0.0);
  long truncated_total = 0;
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t) {
      const double mean = p_sum(s, t) / k_samples;
      op.p_tilde(s, t) = mean;
      const double var = std::max(0.0, p_sumsq(s, t) / k_samples - mean * mean);
      op.p_se(s, t) = std::sqrt(var / k_samples);
    }
    const double rmean = r_sum[s] / k_samples;
    op.r_tilde[s] = rmean;
    const double rvar = std::max(0.0, r_sumsq[s] / k_samples - rmean * rmean);
    op.r_se[s] = std::sqrt(rvar / k_samples);
    truncated_total += truncated[s];
  }

  if (diag) {
    diag->horizon_cap = horizon;
    diag->truncation_bias_bound =
        std::pow(spectral_radius_power(discounted_target(mdp)), static_cast<double>(horizon));
    diag->truncated_fraction =
        static_cast<double>(truncated_total) / (static_cast<double>(k_samples) * n);
    diag->warmup_autocorr_time = integrated_autocorr_time(norm_series);
  }
  return op;
}

BellmanOperator composite_operator(const std::vector<BellmanOperator>& operators,
                                   const StatePartition& partition) {
  if (operators.empty()) throw std::invalid_argument("composite: no operators");
  const int n = operators[0].p_tilde.rows();
  if (static_cast<int>(partition.block_of_state.size()) != n)
    throw std::invalid_argument("composite: partition does not cover the state space");
  if (partition.num_blocks > static_cast<int>(operators.size()))
    throw std::invalid_argument("composite: partition references missing operator");
  const bool any_mc = std::any_of(operators.begin(), operators.end(), [](const auto& o) {
    return o.provenance == BellmanOperator::Provenance::kMonteCarlo;
  });

  BellmanOperator op;
  op.p_tilde = Matrix(n, n);
  op.r_tilde.assign(n, 0.0);
  if (any_mc) {
    op.provenance = BellmanOperator::Provenance::kMonteCarlo;
    op.p_se = Matrix(n, n);
    op.r_se.assign(n, 0.0);
  }
  for (int s = 0; s < n; ++s) {
    const BellmanOperator& src = operators[partition.block_of_state[s]];
    if (src.p_tilde.rows() != n)
      throw std::invalid_argument("composite: operators on mismatched state spaces");
    for (int t = 0; t < n; ++t) op.p_tilde(s, t) = src.p_tilde(s, t);
    op.r_tilde[s] = src.r_tilde[s];
    if (any_mc && src.provenance == BellmanOperator::Provenance::kMonteCarlo) {
      for (int t = 0; t < n; ++t) op.p_se(s, t) = src.p_se(s, t);
      op.r_se[s] = src.r_se[s];
      op.samples_per_state = std::max(op.samples_per_state, src.samples_per_state);
    }
  }
  return op;
}

Theorem3Report verify_theorem3(const BellmanOperator& op, const TabularMdp& mdp) {
  const int n = op.p_tilde.rows();
  Theorem3Report rep;

  rep.min_entry = 0.0;
  rep.max_row_sum = 0.0;
  for (int s = 0; s < n; ++s) {
    double row = 0.0;
    for (int t = 0; t < n; ++t) {
      rep.min_entry = std::min(rep.min_entry, op.p_tilde(s, t));
      row += op.p_tilde(s, t);
    }
    rep.max_row_sum = std::max(rep.max_row_sum, row);
  }
  const double entry_slack =
      op.provenance == BellmanOperator::Provenance::kMonteCarlo ? 1e-9 : 1e-12;
  rep.substochastic_ok = rep.min_entry >= -entry_slack && rep.max_row_sum <= 1.0 + 1e-9;

  rep.sigma = spectral_radius_power(op.p_tilde);
  rep.sigma_ok = rep.sigma < 1.0;

  const Vector v_pi = value_function(mdp);
  Vector resid = op.apply(v_pi) - v_pi;
  rep.fixed_point_residual = norm_inf(resid);
  if (op.provenance == BellmanOperator::Provenance::kMonteCarlo) {
    double max_z = 0.0;
    for (int s = 0; s < n; ++s) {
      double se2 = op.r_se[s] * op.r_se[s];
      for (int t = 0; t < n; ++t) {
        const double c = op.p_se(s, t) * v_pi[t];
        se2 += c * c;
      }
      const double se = std::sqrt(se2);
      max_z = std::max(max_z, std::abs(resid[s]) / (se > 0 ? se : 1e-300));
    }
    rep.fixed_point_max_z = max_z;
  }

  // Weighted-sup-norm witness: w = (I - P)^{-1} 1 (expected exit time).
  if (rep.sigma_ok) {
    Matrix a = Matrix::identity(n);
    a -= op.p_tilde;
    try {
      rep.weights = solve_linear(a, Vector(n, 1.0));
      rep.weights_ok = true;
      const Vector pw = op.p_tilde * rep.weights;
      for (int s = 0; s < n; ++s)
        if (!(rep.weights[s] > 0.0) || !(pw[s] < rep.weights[s])) rep.weights_ok = false;
    } catch (const SingularMatrixError&) {
      rep.weights_ok = false;
    }
  }
  return rep;
}

namespace {

Matrix diag_times(const Vector& d, const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out(i, j) = d[i] * m(i, j);
  return out;
}

Vector orthogonal_projection(const Matrix& phi, const Vector& xi, const Vector& x) {
  // Pi_xi x = Phi (Phi^T Xi Phi)^{-1} Phi^T Xi x
  const Matrix phit = phi.transpose();
  const Matrix gram = phit * diag_times(xi, phi);
  Vector rhs(phi.cols(), 0.0);
  for (int j = 0; j < phi.cols(); ++j) {
    double s = 0.0;
    for (int i = 0; i < phi.rows(); ++i) s += phi(i, j) * xi[i] * x[i];
    rhs[j] = s;
  }
  return phi * solve_linear(gram, rhs);
}

}  // namespace

ObliqueAnalysis projected_solution(const BellmanOperator& op, const FeatureMap& features,
                                   const Vector& zeta, const Vector& v_pi) {
  const int n = op.p_tilde.rows();
  const Matrix& phi = features.phi;
  Matrix i_minus_p = Matrix::identity(n);
  i_minus_p -= op.p_tilde;

  // Closed form: theta = (Phi^T D (I-P) Phi)^{-1} Phi^T D (I-P) v_pi.
  const Matrix dip = diag_times(zeta, i_minus_p);
  const Matrix phit = phi.transpose();
  const Matrix b_mat = phit * (dip * phi);
  if (condition_estimate_1(b_mat) > 1e12)
    throw std::domain_error("projected_solution: projected system singular");
  const Vector theta_cf = solve_linear(b_mat, phit * (dip * v_pi));

  // Direct: Phi^T D (r + (P - I) Phi theta) = 0.
  const Vector rhs = phit * [&] {
    Vector dr(n);
    for (int i = 0; i < n; ++i) dr[i] = zeta[i] * op.r_tilde[i];
    return dr;
  }();
  const Vector theta_direct = solve_linear(b_mat, rhs);

  ObliqueAnalysis out;
  out.theta_td = theta_cf;
  out.v_td = phi * theta_cf;
  const double scale = std::max(1.0, norm2(theta_cf));
  out.path_agreement = norm2(theta_cf - theta_direct) / scale;
  return out;
}

ObliqueAnalysis kappa_bound(const BellmanOperator& op, const FeatureMap& features,
                            const Vector& zeta, const Vector& v_pi, Vector xi) {
  if (xi.empty()) xi = zeta;
  ObliqueAnalysis out = projected_solution(op, features, zeta, v_pi);
  out.xi = xi;

  const int n = op.p_tilde.rows();
  const Matrix& phi = features.phi;
  Matrix i_minus_p = Matrix::identity(n);
  i_minus_p -= op.p_tilde;
  const Matrix psi = i_minus_p.transpose() * diag_times(zeta, phi);

  const Matrix psit_phi = psi.transpose() * phi;
  if (condition_estimate_1(psit_phi) > 1e12)
    throw std::domain_error("kappa_bound: Psi^T Phi singular");
  Vector xi_inv(n);
  for (int i = 0; i < n; ++i) {
    if (!(xi[i] > 0.0)) throw std::invalid_argument("kappa_bound: xi must be positive");
    xi_inv[i] = 1.0 / xi[i];
  }
  const Matrix inner = psi.transpose() * diag_times(xi_inv, psi);
  const Matrix gram = phi.transpose() * diag_times(xi, phi);
  const LuDecomposition lu_psit_phi(psit_phi);
  const LuDecomposition lu_phit_psi(phi.transpose() * psi);
  const Matrix f = lu_psit_phi.solve(inner * lu_phit_psi.solve(gram));

  out.sigma_f = spectral_radius_power(f);
  if (out.sigma_f < 1.0 - 1e-9)
    throw std::domain_error("kappa_bound: sigma(F) fell below 1");
  out.kappa = std::sqrt(std::max(0.0, out.sigma_f - 1.0));

  const Vector proj = orthogonal_projection(phi, xi, v_pi);
  out.bias = weighted_norm(out.v_td - proj, xi);
  out.best_error = weighted_norm(v_pi - proj, xi);
  out.bound_ok = out.bias <= out.kappa * out.best_error + 1e-9;
  return out;
}

KappaTightnessResult kappa_tightness_probe(const BellmanOperator& op, const FeatureMap& features,
                                           const Vector& zeta, const Vector& v_pi, Vector xi,
                                           long draws, std::uint64_t seed) {
  if (xi.empty()) xi = zeta;
  const ObliqueAnalysis base = kappa_bound(op, features, zeta, v_pi, xi);
  const int n = op.p_tilde.rows();
  const Matrix& phi = features.phi;
  Matrix i_minus_p = Matrix::identity(n);
  i_minus_p -= op.p_tilde;
  const Matrix dip = diag_times(zeta, i_minus_p);
  const Matrix phit = phi.transpose();
  const LuDecomposition lu_b(phit * (dip * phi));

  // The bias ratio depends on the value function only, and rewards map onto
  // value functions bijectively, so search directly over candidate v.
  auto ratio_of = [&](const Vector& v) {
    const Vector theta = lu_b.solve(phit * (dip * v));
    const Vector vtd = phi * theta;
    const Vector proj = orthogonal_projection(phi, xi, v);
    const double den = weighted_norm(v - proj, xi);
    if (den <= 1e-13) return 0.0;
    return weighted_norm(vtd - proj, xi) / den;
  };

  RngStream rng(seed, RngStreamId::kProbe);
  auto gaussian_vec = [&] {
    Vector v(n);
    for (double& x : v) x = rng.next_gaussian();
    return v;
  };

  KappaTightnessResult res;
  res.kappa = base.kappa;
  Vector best_v = gaussian_vec();
  res.max_ratio = ratio_of(best_v);
  res.evaluations = 1;

  const long explore = draws / 2;
  for (long k = 1; k < explore; ++k) {
    const Vector v = gaussian_vec();
    const double r = ratio_of(v);
    ++res.evaluations;
    if (r > res.max_ratio) {
      res.max_ratio = r;
      best_v = v;
    }
  }
  // Local refinement around the incumbent with a shrinking step.
  double step = 1.0;
  for (long k = explore; k < draws; ++k) {
    Vector v = best_v;
    const Vector g = gaussian_vec();
    axpy(step, g, v);
    const double r = ratio_of(v);
    ++res.evaluations;
    if (r > res.max_ratio) {
      res.max_ratio = r;
      best_v = v;
    } else {
      step *= 0.999;
      if (step < 1e-6) step = 1e-6;
    }
  }
  return res;
}

CounterexampleReport counterexample_suite() {
  const MdpFile fixture = build_two_state();
  const TabularMdp& mdp = fixture.mdp;
  const BellmanOperator op = exact_operator_state_dependent(mdp, Vector{0.0, 1.0});
  const Vector zeta{0.5, 0.5};

  CounterexampleReport rep;
  // Phi^T D (P - I) Phi for Phi = [[3,1],[1,1]].
  const Matrix& phi = fixture.features.phi;
  Matrix p_minus_i = op.p_tilde;
  p_minus_i -= Matrix::identity(2);
  rep.projected_matrix = phi.transpose() * diag_times(zeta, p_minus_i) * phi;
  rep.projected_matrix_expected = Matrix(2, 2);
  rep.projected_matrix_expected(0, 0) = 0.4862;
  rep.projected_matrix_expected(0, 1) = -0.1713;
  rep.projected_matrix_expected(1, 0) = 0.7787;
  rep.projected_matrix_expected(1, 1) = -0.0738;
  rep.matrix_max_abs_err = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      rep.matrix_max_abs_err =
          std::max(rep.matrix_max_abs_err,
                   std::abs(rep.projected_matrix(i, j) - rep.projected_matrix_expected(i, j)));
  rep.matrix_ok = rep.matrix_max_abs_err < 1e-3;

  // Full-rank features make the projection the identity, so the weighted
  // operator norm is that of P itself: ||D^{1/2} P D^{-1/2}||_2.
  Matrix scaled_p(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      scaled_p(i, j) = std::sqrt(zeta[i]) * op.p_tilde(i, j) / std::sqrt(zeta[j]);
  rep.weighted_op_norm = spectral_norm(scaled_p);
  rep.norm_ok = std::abs(rep.weighted_op_norm - 1.31) <= 0.01;

  // Rank-one features (3,1)^T: sigma(Pi P).
  Matrix phi1(2, 1);
  phi1(0, 0) = 3.0;
  phi1(1, 0) = 1.0;
  const double gram = 0.5 * (9.0 + 1.0);
  Matrix proj(2, 2);  // Phi (Phi^T D Phi)^{-1} Phi^T D
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) proj(i, j) = phi1(i, 0) * phi1(j, 0) * zeta[j] / gram;
  rep.rank1_spectral_radius = spectral_radius_power(proj * op.p_tilde);
  rep.sigma_ok = std::abs(rep.rank1_spectral_radius - 1.10) <= 0.01;

  const auto eig = eigenvalues_2x2(rep.projected_matrix);
  rep.eig_real_min = std::min(eig.first.real(), eig.second.real());
  rep.eig_positive = rep.eig_real_min > 0.0;
  return rep;
}

Theorem2Report verify_theorem2(const TabularMdp& mdp, const FeatureMap& features,
                               const SchemePtr& scheme, const Theorem2Config& config) {
  const int n_feat = features.n_features;
  const int n = mdp.n_states;
  Theorem2Report rep;

  // Left side: LSTD averages from one long behavior run, batched for
  // standard errors.
  const int n_batches = std::max(2, config.n_batches);
  const long per_batch = config.run_length / n_batches;
  std::vector<LstdAccumulator> batches;
  batches.reserve(n_batches);
  {
    TraceRunConfig rc;
    rc.seed = config.seed;
    TraceProcess proc(mdp, features, scheme, rc);
    for (int b = 0; b < n_batches; ++b) {
      LstdAccumulator acc(n_feat);
      for (long t = 0; t < per_batch; ++t) acc.accumulate(proc.step(), features);
      batches.push_back(std::move(acc));
    }
  }
  Matrix a_mean(n_feat, n_feat), a_m2(n_feat, n_feat);
  Vector b_mean(n_feat, 0.0), b_m2(n_feat, 0.0);
  for (int b = 0; b < n_batches; ++b) {
    const Matrix& ab = batches[b].a_matrix();
    const Vector& bb = batches[b].b_vector();
    for (int i = 0; i < n_feat; ++i) {
      for (int j = 0; j < n_feat; ++j) {
        const double d = ab(i, j) - a_mean(i, j);
        a_mean(i, j) += d / (b + 1);
        a_m2(i, j) += d * (ab(i, j) - a_mean(i, j));
      }
      const double d = bb[i] - b_mean[i];
      b_mean[i] += d / (b + 1);
      b_m2[i] += d * (bb[i] - b_mean[i]);
    }
  }
  rep.lhs_a = a_mean;
  rep.lhs_b = b_mean;
  Matrix a_se(n_feat, n_feat);
  Vector b_se(n_feat, 0.0);
  for (int i = 0; i < n_feat; ++i) {
    for (int j = 0; j < n_feat; ++j)
      a_se(i, j) = std::sqrt(a_m2(i, j) / (n_batches - 1) / n_batches);
    b_se[i] = std::sqrt(b_m2[i] / (n_batches - 1) / n_batches);
  }

  // Right side: projected operator construction from the Monte Carlo
  // operator, Phi^T D (P - I) Phi and Phi^T D r.
  McOperatorConfig mc = config.mc;
  if (mc.seed == 0) mc.seed = config.seed + 0x9e37;
  rep.mc_op = mc_operator_history_dependent(mdp, features, scheme, mc);
  const BellmanOperator& op = rep.mc_op;
  const Vector zeta = behavior_stationary_dist(mdp);

  rep.rhs_a = Matrix(n_feat, n_feat);
  rep.rhs_b.assign(n_feat, 0.0);
  Matrix rhs_a_se(n_feat, n_feat);
  Vector rhs_b_se(n_feat, 0.0);
  for (int i = 0; i < n_feat; ++i) {
    for (int j = 0; j < n_feat; ++j) {
      double acc = 0.0, var = 0.0;
      for (int s = 0; s < n; ++s) {
        const double w = zeta[s] * features.phi(s, i);
        double row = -features.phi(s, j);
        for (int t = 0; t < n; ++t) {
          row += op.p_tilde(s, t) * features.phi(t, j);
          const double c = w * op.p_se(s, t) * features.phi(t, j);
          var += c * c;
        }
        acc += w * row;
      }
      rep.rhs_a(i, j) = acc;
      rhs_a_se(i, j) = std::sqrt(var);
    }
    double acc = 0.0, var = 0.0;
    for (int s = 0; s < n; ++s) {
      const double w = zeta[s] * features.phi(s, i);
      acc += w * op.r_tilde[s];
      var += w * w * op.r_se[s] * op.r_se[s];
    }
    rep.rhs_b[i] = acc;
    rhs_b_se[i] = std::sqrt(var);
  }

  rep.combined_a_se = Matrix(n_feat, n_feat);
  rep.combined_b_se.assign(n_feat, 0.0);
  double max_z = 0.0;
  double max_se = 0.0, scale = 0.0;
  for (int i = 0; i < n_feat; ++i) {
    for (int j = 0; j < n_feat; ++j) {
      const double se = std::hypot(a_se(i, j), rhs_a_se(i, j));
      rep.combined_a_se(i, j) = se;
      max_se = std::max(max_se, se);
      scale = std::max(scale, std::abs(rep.rhs_a(i, j)));
      max_z = std::max(max_z, std::abs(rep.lhs_a(i, j) - rep.rhs_a(i, j)) /
                                  (se > 0 ? se : 1e-300));
    }
    const double se = std::hypot(b_se[i], rhs_b_se[i]);
    rep.combined_b_se[i] = se;
    max_se = std::max(max_se, se);
    scale = std::max(scale, std::abs(rep.rhs_b[i]));
    max_z = std::max(max_z, std::abs(rep.lhs_b[i] - rep.rhs_b[i]) / (se > 0 ? se : 1e-300));
  }
  rep.max_z = max_z;
  rep.inconclusive = max_se > 0.5 * std::max(scale, 1e-12);
  rep.pass = !rep.inconclusive && max_z <= 3.0;
  return rep;
}

}  // namespace gbetd
