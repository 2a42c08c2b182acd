#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gbetd/lambda_scheme.hpp"
#include "gbetd/linalg.hpp"
#include "gbetd/lstd.hpp"
#include "gbetd/mdp.hpp"
#include "gbetd/trace.hpp"

namespace gbetd {

/// Affine operator T v = r_tilde + P_tilde v on the tabular state space.
struct BellmanOperator {
  enum class Provenance { kExact, kMonteCarlo };

  Matrix p_tilde;
  Vector r_tilde;
  Provenance provenance = Provenance::kExact;
  long samples_per_state = 0;
  Matrix p_se;  // entrywise standard errors, Monte Carlo only
  Vector r_se;

  Vector apply(const Vector& v) const { return r_tilde + p_tilde * v; }
};

/// One-step operator: P_tilde = P Gamma, r_tilde = r_pi.
BellmanOperator one_step_operator(const TabularMdp& mdp);

/// Closed form for lambda depending on the current state: with Lambda =
/// diag(lambda), r_tilde = (I - P Gamma Lambda)^{-1} r_pi and
/// P_tilde = (I - P Gamma Lambda)^{-1} P Gamma (I - Lambda).
///
/// This follows from summing the temporal-difference expansion of Tv - v for
/// per-step stop probability 1 - lambda(S_t): the expected product of
/// lambda*gamma along t target-policy steps is the (s,.) row of
/// (P Gamma Lambda)^t, so Tv - v = (I - P Gamma Lambda)^{-1}(r_pi + P Gamma v - v).
BellmanOperator exact_operator_state_dependent(const TabularMdp& mdp, const Vector& lambda);

/// Same construction with lambda attached to transitions (covers Retrace's
/// lambda(s,s') = beta min(1,rho)/rho). Q[s][s'] = P[s][s'] gamma(s') lambda(s,s'),
/// r_tilde = (I-Q)^{-1} r_pi, P_tilde = (I-Q)^{-1} (P Gamma - Q).
BellmanOperator exact_operator_transition_dependent(const TabularMdp& mdp,
                                                    const Matrix& lambda);

struct McOperatorConfig {
  long warmup_steps = 100000;
  long samples_per_state = 10000;
  std::optional<long> horizon_cap;  // default: smallest H with gamma_max^H < 1e-8
  std::uint64_t seed = 0;
  int n_threads = 1;
};

struct McOperatorDiagnostics {
  long horizon_cap = 0;
  double truncation_bias_bound = 0;  // sigma(P Gamma)^horizon
  double truncated_fraction = 0;     // rollouts that hit the cap
  double warmup_autocorr_time = 0;   // integrated autocorrelation of ||e_t||
};

/// Monte Carlo construction for history-dependent lambda: the initial
/// (y_0, e_0) is drawn from a long behavior-policy run conditioned on the
/// start state, then target-policy rollouts stop with probability 1 - lambda_t
/// per step. P_tilde[s][s'] estimates E_s[gamma_1^tau 1(S_tau = s')] and
/// r_tilde[s] estimates E_s[R^tau].
BellmanOperator mc_operator_history_dependent(const TabularMdp& mdp, const FeatureMap& features,
                                              const SchemePtr& scheme,
                                              const McOperatorConfig& config,
                                              McOperatorDiagnostics* diag = nullptr);

/// Row s of the result comes from operators[i] with s in block i.
BellmanOperator composite_operator(const std::vector<BellmanOperator>& operators,
                                   const StatePartition& partition);

struct Theorem3Report {
  bool substochastic_ok = false;
  double min_entry = 0;
  double max_row_sum = 0;
  double sigma = 0;
  bool sigma_ok = false;
  double fixed_point_residual = 0;  // ||r + P v_pi - v_pi||_inf
  double fixed_point_max_z = 0;     // residual in propagated-SE units (MC only)
  Vector weights;                   // w = (I - P)^{-1} 1, positive with P w < w
  bool weights_ok = false;

  bool pass(double fixed_point_tol = 1e-9) const {
    const bool fp_ok = fixed_point_residual < fixed_point_tol || fixed_point_max_z <= 3.0;
    return substochastic_ok && sigma_ok && fp_ok && weights_ok;
  }
};

Theorem3Report verify_theorem3(const BellmanOperator& op, const TabularMdp& mdp);

struct ObliqueAnalysis {
  Vector theta_td;
  Vector v_td;
  double path_agreement = 0;  // closed form vs direct projected solve, relative

  Vector xi;            // norm weights for the error bound
  double sigma_f = 0;   // spectral radius of the n x n bound matrix
  double kappa = 0;     // sqrt(sigma_f - 1)
  double bias = 0;      // ||v_td - Pi_xi v_pi||_xi
  double best_error = 0;  // ||v_pi - Pi_xi v_pi||_xi
  bool bound_ok = false;  // bias <= kappa * best_error
};

/// Solves the projected equation v = Pi_zeta T v two ways: the closed form
/// v_td = Phi (Phi^T D (I-P) Phi)^{-1} Phi^T D (I-P) v_pi, and the direct
/// linear solve of Phi^T D (T Phi theta - Phi theta) = 0. Throws
/// std::domain_error when the projected system is singular.
ObliqueAnalysis projected_solution(const BellmanOperator& op, const FeatureMap& features,
                                   const Vector& zeta, const Vector& v_pi);

/// Adds the oblique-projection error bound: Psi = (I-P)^T D Phi,
/// F = (Psi^T Phi)^{-1} (Psi^T Xi^{-1} Psi) (Phi^T Psi)^{-1} (Phi^T Xi Phi),
/// kappa = sqrt(sigma(F) - 1), and checks
/// ||v_td - Pi_xi v_pi||_xi <= kappa ||v_pi - Pi_xi v_pi||_xi.
/// xi defaults to zeta when empty.
ObliqueAnalysis kappa_bound(const BellmanOperator& op, const FeatureMap& features,
                            const Vector& zeta, const Vector& v_pi, Vector xi = {});

struct KappaTightnessResult {
  double kappa = 0;
  double max_ratio = 0;     // best bias/best-error ratio found
  long evaluations = 0;
};

/// Random search (with local refinement) over reward vectors for the
/// worst-case bias ratio; the ratio can approach but never exceed kappa.
KappaTightnessResult kappa_tightness_probe(const BellmanOperator& op, const FeatureMap& features,
                                           const Vector& zeta, const Vector& v_pi, Vector xi,
                                           long draws, std::uint64_t seed);

struct CounterexampleReport {
  Matrix projected_matrix;           // Phi^T D (P_tilde - I) Phi
  Matrix projected_matrix_expected;  // reference values
  double matrix_max_abs_err = 0;
  double weighted_op_norm = 0;       // ||Pi P_tilde||_zeta, full-rank features
  double rank1_spectral_radius = 0;  // sigma(Pi P_tilde) with features (3,1)^T
  double eig_real_min = 0;           // smallest real part among eigenvalues
  bool matrix_ok = false;
  bool norm_ok = false;       // 1.31 +- 0.01
  bool sigma_ok = false;      // 1.10 +- 0.01
  bool eig_positive = false;  // both real parts positive

  bool pass() const { return matrix_ok && norm_ok && sigma_ok && eig_positive; }
};

/// Self-contained two-state fixture (gamma = 0.95, lambda = (0,1),
/// zeta = (0.5, 0.5)) demonstrating that the projected operator can expand.
CounterexampleReport counterexample_suite();

struct Theorem2Report {
  Matrix lhs_a, rhs_a;  // coefficient matrices of the linear equation in theta
  Vector lhs_b, rhs_b;  // offsets
  Matrix combined_a_se;
  Vector combined_b_se;
  double max_z = 0;  // max entrywise |lhs - rhs| / combined SE
  bool pass = false;
  bool inconclusive = false;
  BellmanOperator mc_op;  // the operator behind the right side
};

struct Theorem2Config {
  long run_length = 1000000;
  int n_batches = 20;  // batch-means standard errors for the run side
  McOperatorConfig mc;
  std::uint64_t seed = 0;
};

/// Estimates both sides of the stationary identity
///   E_zeta[e_0 delta_0(v)] = sum_s zeta(s) phi(s) (Tv - v)(s)
/// as linear functions of theta -- the left from a long behavior run's LSTD
/// averages, the right from the Monte Carlo operator -- and compares them
/// entrywise in combined-standard-error units.
Theorem2Report verify_theorem2(const TabularMdp& mdp, const FeatureMap& features,
                               const SchemePtr& scheme, const Theorem2Config& config);

}  // namespace gbetd
