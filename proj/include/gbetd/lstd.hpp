#pragma once

#include <optional>
#include <vector>

#include "gbetd/linalg.hpp"
#include "gbetd/mdp.hpp"
#include "gbetd/trace.hpp"

namespace gbetd {

struct LstdSolution {
  Vector theta;
  double residual_norm = 0;
  double condition_estimate = 0;
  bool least_squares_fallback = false;
  long count = 0;
};

/// Builds the empirical linear equation A theta + b = 0 from trace records,
/// where A and b are running averages of e_k rho_k (gamma_{k+1} phi(S_{k+1})
/// - phi(S_k))^T and e_k rho_k R_k. Averages are folded count-weighted in
/// blocks so that sparse-feature updates stay cheap and magnitudes stay
/// bounded over long runs.
class LstdAccumulator {
 public:
  explicit LstdAccumulator(int n_features, std::optional<double> truncation = std::nullopt);

  void accumulate(const TransitionRecord& rec, const FeatureMap& features);
  void accumulate(const Vector& e_prev, double rho, double reward, double gamma_next,
                  const Vector& phi_prev, const Vector& phi_next);
  /// Binary-feature fast path: the feature vectors are given by their set bits.
  void accumulate_binary(const Vector& e_prev, double rho, double reward, double gamma_next,
                         const std::vector<int>& ones_prev, const std::vector<int>& ones_next);

  /// Count-weighted merge of another accumulator over the same feature space.
  void merge(const LstdAccumulator& other);

  long count() const { return count_ + pending_count_; }
  std::optional<double> truncation() const { return truncation_; }
  const Matrix& a_matrix() const;  // mean coefficient matrix
  const Vector& b_vector() const;  // mean offset

  /// Solves A theta = -b by pivoted LU; falls back to the minimum-norm
  /// least-squares solution (flagged) when the condition estimate exceeds 1e12.
  LstdSolution solve() const;

 private:
  void fold() const;
  Vector clamp(const Vector& e) const;

  int n_;
  std::optional<double> truncation_;
  mutable Matrix a_mean_;
  mutable Vector b_mean_;
  mutable long count_ = 0;
  mutable Matrix a_pending_;
  mutable Vector b_pending_;
  mutable long pending_count_ = 0;
  long fold_every_ = 4096;
};

struct SolutionMetrics {
  double param_distance = 0;  // ||theta - theta_ref|| / ||theta_ref||
  double value_error = 0;     // ||Phi theta - v_ref||_zeta / ||v_ref||_zeta
};

double weighted_norm(const Vector& x, const Vector& weights);

/// Distance of theta to a reference solution in parameter space and the
/// zeta-weighted normalized value error of Phi theta against a reference
/// value function.
SolutionMetrics solution_metrics(const Vector& theta, const Vector& theta_ref,
                                 const FeatureMap& features, const Vector& v_ref,
                                 const Vector& zeta);

}  // namespace gbetd
