#include "gbetd/lstd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gbetd {

LstdAccumulator::LstdAccumulator(int n_features, std::optional<double> truncation)
    : n_(n_features),
      truncation_(truncation),
      a_mean_(n_features, n_features),
      b_mean_(n_features, 0.0),
      a_pending_(n_features, n_features),
      b_pending_(n_features, 0.0) {
  if (n_features <= 0) throw std::invalid_argument("lstd: n_features must be positive");
  if (truncation_ && *truncation_ <= 0.0)
    throw std::invalid_argument("lstd: truncation bound must be positive");
}

Vector LstdAccumulator::clamp(const Vector& e) const {
  if (!truncation_) return e;
  Vector c(e);
  const double b = *truncation_;
  for (double& x : c) x = std::clamp(x, -b, b);
  return c;
}

void LstdAccumulator::fold() const {
  if (pending_count_ == 0) return;
  const long total = count_ + pending_count_;
  const double wm = static_cast<double>(count_) / total;
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j)
      a_mean_(i, j) = wm * a_mean_(i, j) + a_pending_(i, j) / total;
    b_mean_[i] = wm * b_mean_[i] + b_pending_[i] / total;
  }
  count_ = total;
  a_pending_ = Matrix(n_, n_);
  b_pending_.assign(n_, 0.0);
  pending_count_ = 0;
}

void LstdAccumulator::accumulate(const Vector& e_prev, double rho, double reward,
                                 double gamma_next, const Vector& phi_prev,
                                 const Vector& phi_next) {
  if (static_cast<int>(e_prev.size()) != n_ || static_cast<int>(phi_prev.size()) != n_ ||
      static_cast<int>(phi_next.size()) != n_)
    throw std::invalid_argument("lstd: feature dimension mismatch");
  const Vector e = clamp(e_prev);
  for (int i = 0; i < n_; ++i) {
    const double w = e[i] * rho;
    if (w == 0.0) continue;
    for (int j = 0; j < n_; ++j)
      a_pending_(i, j) += w * (gamma_next * phi_next[j] - phi_prev[j]);
    b_pending_[i] += w * reward;
  }
  if (++pending_count_ >= fold_every_) fold();
}

void LstdAccumulator::accumulate_binary(const Vector& e_prev, double rho, double reward,
                                        double gamma_next, const std::vector<int>& ones_prev,
                                        const std::vector<int>& ones_next) {
  if (static_cast<int>(e_prev.size()) != n_)
    throw std::invalid_argument("lstd: feature dimension mismatch");
  const Vector e = clamp(e_prev);
  for (int i = 0; i < n_; ++i) {
    const double w = e[i] * rho;
    if (w == 0.0) continue;
    for (int j : ones_next) a_pending_(i, j) += w * gamma_next;
    for (int j : ones_prev) a_pending_(i, j) -= w;
    b_pending_[i] += w * reward;
  }
  if (++pending_count_ >= fold_every_) fold();
}

void LstdAccumulator::accumulate(const TransitionRecord& rec, const FeatureMap& features) {
  accumulate(rec.trace_prev, rec.rho_prev, rec.reward_prev, rec.gamma_t,
             features.phi.row(rec.s_prev), features.phi.row(rec.s_next));
}

void LstdAccumulator::merge(const LstdAccumulator& other) {
  if (other.n_ != n_) throw std::invalid_argument("lstd: merging mismatched accumulators");
  fold();
  other.fold();
  const long total = count_ + other.count_;
  if (total == 0) return;
  const double wa = static_cast<double>(count_) / total;
  const double wb = static_cast<double>(other.count_) / total;
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j)
      a_mean_(i, j) = wa * a_mean_(i, j) + wb * other.a_mean_(i, j);
    b_mean_[i] = wa * b_mean_[i] + wb * other.b_mean_[i];
  }
  count_ = total;
}

const Matrix& LstdAccumulator::a_matrix() const {
  fold();
  return a_mean_;
}

const Vector& LstdAccumulator::b_vector() const {
  fold();
  return b_mean_;
}

LstdSolution LstdAccumulator::solve() const {
  fold();
  if (count_ == 0) throw std::invalid_argument("lstd: nothing accumulated");
  LstdSolution sol;
  sol.count = count_;
  Vector rhs = scaled(b_mean_, -1.0);
  sol.condition_estimate = condition_estimate_1(a_mean_);
  if (sol.condition_estimate > 1e12) {
    sol.theta = min_norm_least_squares(a_mean_, rhs);
    sol.least_squares_fallback = true;
  } else {
    sol.theta = solve_linear(a_mean_, rhs);
  }
  Vector resid = a_mean_ * sol.theta;
  axpy(1.0, b_mean_, resid);
  sol.residual_norm = norm2(resid);
  return sol;
}

double weighted_norm(const Vector& x, const Vector& weights) {
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i] * x[i];
  return std::sqrt(s);
}

SolutionMetrics solution_metrics(const Vector& theta, const Vector& theta_ref,
                                 const FeatureMap& features, const Vector& v_ref,
                                 const Vector& zeta) {
  const double ref_norm = norm2(theta_ref);
  const double v_norm = weighted_norm(v_ref, zeta);
  if (ref_norm == 0.0 || v_norm == 0.0)
    throw std::invalid_argument("solution_metrics: zero-norm reference");
  SolutionMetrics m;
  m.param_distance = norm2(theta - theta_ref) / ref_norm;
  const Vector v = features.phi * theta;
  m.value_error = weighted_norm(v - v_ref, zeta) / v_norm;
  return m;
}

}  // namespace gbetd
