#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "gbetd/linalg.hpp"
#include "gbetd/mdp.hpp"

namespace gbetd {

/// A rule for the bootstrapping parameter: a finite memory state evolving as
/// y_t = g(y_{t-1}, S_t) plus a map lambda(y, e_prev) -> [0,1] that may also
/// look at the transition's discount and importance ratio. Implementations
/// are immutable value objects.
class LambdaScheme {
 public:
  virtual ~LambdaScheme() = default;

  virtual std::string name() const = 0;

  virtual int memory_init(int s0) const = 0;
  virtual int memory_step(int y, int s_next) const = 0;

  /// lambda(y_t, e_{t-1}) given gamma_t = gamma(S_t) and rho_{t-1} = rho(S_{t-1}, S_t).
  virtual double lambda(int y, const Vector& e_prev, double gamma_t, double rho_prev) const = 0;

  /// C_y such that ||gamma rho lambda(y,e) e|| <= C_y for every e, when the
  /// scheme guarantees one. Empty means no finite bound is claimed.
  virtual std::optional<double> claimed_trace_bound(int y) const = 0;

  /// Norm the scheme's guarantees refer to. All shipped schemes use "l2".
  virtual std::string norm_label() const { return "l2"; }
};

using SchemePtr = std::shared_ptr<const LambdaScheme>;

/// Constant lambda; trivial single-state memory.
SchemePtr make_constant_lambda(double lambda);

/// Trace scaling: multiply gamma*rho*e down to length c whenever it exceeds
/// the per-transition threshold. Memory is the transition pair (s, s').
/// `beta` multiplies the resulting lambda (default keeps lambda as large as
/// possible).
SchemePtr make_scaling_scheme(int n_states, double c, double beta = 1.0);
SchemePtr make_scaling_scheme(Matrix c_thresholds, double beta = 1.0);

/// Retrace: lambda_t = beta * min(1, rho)/rho with 0/0 = 0.
SchemePtr make_retrace_scheme(int n_states, double beta);

/// Retrace variant truncating ratios at k >= 1, then scaling to keep the
/// pre-trace length at most c.
SchemePtr make_truncated_retrace_scheme(int n_states, double k, double c, double beta);

struct ConformanceReport {
  bool lambda_range_ok = true;
  double lambda_min = 1.0;
  double lambda_max = 0.0;

  double lipschitz_max_ratio = 0.0;  // Condition (i): must stay <= 1
  bool nonexpansive_ok = true;

  bool bound_claimed_everywhere = true;
  double bound_max_excess = 0.0;   // max ||gamma rho lambda e|| - C_y over claimed y
  double growth_max_ratio = 0.0;   // max ||gamma rho lambda e|| / ||e||, evidence when unclaimed
  bool bounded_ok = true;          // Condition (ii)

  long samples = 0;

  bool pass() const { return lambda_range_ok && nonexpansive_ok && bounded_ok; }
};

/// Randomized conformance test of the two lambda-function conditions along a
/// behavior-policy walk (so only feasible transitions reach each memory state).
/// Probe traces are drawn from the ball of radius 10 * max claimed bound
/// (or a default radius when the scheme claims none).
ConformanceReport check_condition3(const LambdaScheme& scheme, const TabularMdp& mdp,
                                   long samples, std::uint64_t seed);

}  // namespace gbetd
