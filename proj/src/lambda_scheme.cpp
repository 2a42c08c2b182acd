#include "gbetd/lambda_scheme.hpp"

#include <algorithm>
#include <cmath>

#include "gbetd/rng.hpp"

namespace gbetd {

namespace {

class ConstantLambda final : public LambdaScheme {
 public:
  explicit ConstantLambda(double lambda) : lambda_(lambda) {
    if (lambda < 0.0 || lambda > 1.0)
      throw std::invalid_argument("constant lambda must lie in [0,1]");
  }
  std::string name() const override { return "constant"; }
  int memory_init(int) const override { return 0; }
  int memory_step(int, int) const override { return 0; }
  double lambda(int, const Vector&, double, double) const override { return lambda_; }
  std::optional<double> claimed_trace_bound(int) const override {
    if (lambda_ == 0.0) return 0.0;
    return std::nullopt;
  }

 private:
  double lambda_;
};

/// Memory state is the transition pair, coded s*N + s'.
class PairMemoryScheme : public LambdaScheme {
 public:
  explicit PairMemoryScheme(int n_states) : n_states_(n_states) {
    if (n_states <= 0) throw std::invalid_argument("n_states must be positive");
  }
  int memory_init(int s0) const override { return s0 * n_states_ + s0; }
  int memory_step(int y, int s_next) const override {
    return (y % n_states_) * n_states_ + s_next;
  }

 protected:
  int n_states_;
};

class ScalingScheme final : public PairMemoryScheme {
 public:
  ScalingScheme(int n_states, Matrix thresholds, double beta)
      : PairMemoryScheme(n_states), c_(std::move(thresholds)), beta_(beta) {
    if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("scaling: beta must lie in [0,1]");
    for (int i = 0; i < c_.rows(); ++i)
      for (int j = 0; j < c_.cols(); ++j)
        if (c_(i, j) < 0.0) throw std::invalid_argument("scaling: negative threshold");
  }
  std::string name() const override { return "scaling"; }
  double lambda(int y, const Vector& e_prev, double gamma_t, double rho_prev) const override {
    const double c = c_(y / n_states_, y % n_states_);
    const double pre = gamma_t * rho_prev * norm2(e_prev);
    if (pre <= c) return beta_;
    return beta_ * c / pre;
  }
  std::optional<double> claimed_trace_bound(int y) const override {
    return beta_ * c_(y / n_states_, y % n_states_);
  }

 private:
  Matrix c_;
  double beta_;
};

class RetraceScheme final : public PairMemoryScheme {
 public:
  RetraceScheme(int n_states, double beta) : PairMemoryScheme(n_states), beta_(beta) {
    if (beta <= 0.0 || beta > 1.0) throw std::invalid_argument("retrace: beta must lie in (0,1]");
  }
  std::string name() const override { return "retrace"; }
  double lambda(int, const Vector&, double, double rho_prev) const override {
    if (rho_prev == 0.0) return 0.0;
    return beta_ * std::min(1.0, rho_prev) / rho_prev;
  }
  std::optional<double> claimed_trace_bound(int) const override { return std::nullopt; }

 private:
  double beta_;
};

class TruncatedRetraceScheme final : public PairMemoryScheme {
 public:
  TruncatedRetraceScheme(int n_states, double k, double c, double beta)
      : PairMemoryScheme(n_states), k_(k), c_(c), beta_(beta) {
    if (k < 1.0) throw std::invalid_argument("truncated retrace: k must be >= 1");
    if (c <= 0.0) throw std::invalid_argument("truncated retrace: c must be positive");
    if (beta <= 0.0 || beta > 1.0)
      throw std::invalid_argument("truncated retrace: beta must lie in (0,1]");
  }
  std::string name() const override { return "truncated_retrace"; }
  double lambda(int, const Vector& e_prev, double gamma_t, double rho_prev) const override {
    if (rho_prev == 0.0) return 0.0;
    const double lam_tilde = std::min(k_, rho_prev) / rho_prev;
    const double pre = lam_tilde * gamma_t * rho_prev * norm2(e_prev);
    if (pre <= c_) return beta_ * lam_tilde;
    return beta_ * c_ / (gamma_t * rho_prev * norm2(e_prev));
  }
  std::optional<double> claimed_trace_bound(int) const override { return beta_ * c_; }

 private:
  double k_;
  double c_;
  double beta_;
};

}  // namespace

SchemePtr make_constant_lambda(double lambda) {
  return std::make_shared<ConstantLambda>(lambda);
}

SchemePtr make_scaling_scheme(int n_states, double c, double beta) {
  if (c < 0.0) throw std::invalid_argument("scaling: negative threshold");
  return std::make_shared<ScalingScheme>(n_states, Matrix(n_states, n_states, c), beta);
}

SchemePtr make_scaling_scheme(Matrix c_thresholds, double beta) {
  const int n = c_thresholds.rows();
  if (c_thresholds.cols() != n) throw std::invalid_argument("scaling: thresholds must be square");
  return std::make_shared<ScalingScheme>(n, std::move(c_thresholds), beta);
}

SchemePtr make_retrace_scheme(int n_states, double beta) {
  return std::make_shared<RetraceScheme>(n_states, beta);
}

SchemePtr make_truncated_retrace_scheme(int n_states, double k, double c, double beta) {
  return std::make_shared<TruncatedRetraceScheme>(n_states, k, c, beta);
}

ConformanceReport check_condition3(const LambdaScheme& scheme, const TabularMdp& mdp,
                                   long samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("check_condition3: samples must be >= 1");
  const int n = mdp.n_states;
  const Matrix rho = importance_ratio_matrix(mdp);

  // Probe radius per the claimed bounds; a fixed default when none is claimed.
  double max_claim = 0.0;
  bool any_claim = false, all_claimed = true;
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t) {
      if (mdp.p_behavior(s, t) <= 0.0) continue;
      const int y = scheme.memory_step(scheme.memory_init(s), t);
      if (auto c = scheme.claimed_trace_bound(y)) {
        any_claim = true;
        max_claim = std::max(max_claim, *c);
      } else {
        all_claimed = false;
      }
    }
  }
  const double radius = any_claim && max_claim > 0.0 ? 10.0 * max_claim : 100.0;

  ConformanceReport rep;
  rep.bound_claimed_everywhere = all_claimed;

  RngStream walk(seed, RngStreamId::kTransition);
  RngStream probe(seed, RngStreamId::kProbe);
  // Feature dimension is irrelevant to the conditions; probe in a small space.
  const int dim = 5;
  auto random_ball = [&](double r) {
    Vector e(dim);
    for (double& x : e) x = probe.next_gaussian();
    const double nrm = norm2(e);
    const double scale = r * std::pow(probe.next_double(), 1.0 / dim) / (nrm > 0 ? nrm : 1.0);
    return scaled(e, scale);
  };

  int s = 0;
  int y = scheme.memory_init(s);
  for (long it = 0; it < samples; ++it) {
    const int s_next = walk.next_categorical(mdp.p_behavior.row_data(s), n);
    y = scheme.memory_step(y, s_next);
    const double r = rho(s, s_next);
    const double g = mdp.discount[s_next];

    const Vector e = random_ball(radius);
    const Vector e2 = random_ball(radius);
    const double lam = scheme.lambda(y, e, g, r);
    const double lam2 = scheme.lambda(y, e2, g, r);
    rep.lambda_min = std::min({rep.lambda_min, lam, lam2});
    rep.lambda_max = std::max({rep.lambda_max, lam, lam2});
    if (lam < 0.0 || lam > 1.0 || lam2 < 0.0 || lam2 > 1.0) rep.lambda_range_ok = false;

    const Vector le = scaled(e, lam);
    const Vector le2 = scaled(e2, lam2);
    const double denom = norm2(e - e2);
    if (denom > 1e-12)
      rep.lipschitz_max_ratio = std::max(rep.lipschitz_max_ratio, norm2(le - le2) / denom);

    const double pre = g * r * lam * norm2(e);
    const double en = norm2(e);
    if (en > 1e-12) rep.growth_max_ratio = std::max(rep.growth_max_ratio, pre / en);
    if (auto c = scheme.claimed_trace_bound(y))
      rep.bound_max_excess = std::max(rep.bound_max_excess, pre - *c);

    s = s_next;
    ++rep.samples;
  }

  rep.nonexpansive_ok = rep.lipschitz_max_ratio <= 1.0 + 1e-9;
  // With no finite claim for some reachable memory state, condition (ii) fails
  // as soon as the pre-trace grows proportionally to ||e||.
  rep.bounded_ok = all_claimed ? rep.bound_max_excess <= 1e-9 : rep.growth_max_ratio <= 1e-12;
  return rep;
}

}  // namespace gbetd
