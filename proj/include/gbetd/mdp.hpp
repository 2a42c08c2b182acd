#pragma once

#include <iosfwd>
#include <string>

#include "gbetd/linalg.hpp"

namespace gbetd {

/// Finite MDP data for the two-chain off-policy setup: target chain P,
/// behavior chain P°, per-transition rewards r(s,s') and per-state discounts.
struct TabularMdp {
  int n_states = 0;
  Matrix p_target;    // N x N, row-stochastic
  Matrix p_behavior;  // N x N, row-stochastic
  Matrix reward;      // N x N, r(s, s')
  Vector discount;    // length N, in [0,1]

  /// r_pi(s) = sum_{s'} P[s][s'] r(s,s').
  Vector expected_reward() const;
};

struct FeatureMap {
  int n_features = 0;
  Matrix phi;  // N x n, row s is phi(s)^T
  int column_rank = 0;

  Vector feature(int s) const { return phi.row(s); }
  double max_feature_norm() const;
};

FeatureMap make_feature_map(Matrix phi);

struct ValidationReport {
  bool rows_stochastic = false;
  bool absolutely_continuous = false;
  bool discounted_spectral_ok = false;  // sigma(P * Gamma) < 1
  bool behavior_irreducible = false;
  double max_row_sum_error = 0.0;
  double sigma_p_gamma = 0.0;
  std::string detail;

  bool all_ok() const {
    return rows_stochastic && absolutely_continuous && discounted_spectral_ok &&
           behavior_irreducible;
  }
};

/// Checks row-stochasticity, absolute continuity of P w.r.t. P°, sigma(P Gamma) < 1,
/// and irreducibility of P° (strong connectivity of its support graph).
/// Throws std::invalid_argument on dimension mismatch.
ValidationReport validate(const TabularMdp& mdp);

/// P[s][s'] / P°[s][s']; 0 when both vanish. Throws std::domain_error when
/// P°[s][s'] = 0 but P[s][s'] > 0.
double importance_ratio(const TabularMdp& mdp, int s, int s_next);

/// Precomputed ratio matrix (same conventions as importance_ratio).
Matrix importance_ratio_matrix(const TabularMdp& mdp);

/// v_pi = (I - P Gamma)^{-1} r_pi. Verifies the Bellman residual.
Vector value_function(const TabularMdp& mdp);

/// Stationary distribution of P°: zeta^T P° = zeta^T, positive, sums to 1.
Vector behavior_stationary_dist(const TabularMdp& mdp);

// Structured-text serialization. Sections: n_states, n_features, p_target,
// p_behavior, reward, discount, features; '#' starts a comment.
struct MdpFile {
  TabularMdp mdp;
  FeatureMap features;
};
MdpFile load_mdp_file(const std::string& path);
MdpFile read_mdp(std::istream& in);
void write_mdp(std::ostream& out, const TabularMdp& mdp, const FeatureMap& features);

}  // namespace gbetd
