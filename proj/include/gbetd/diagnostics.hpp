#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "gbetd/linalg.hpp"
#include "gbetd/mdp.hpp"

namespace gbetd {

/// Probe points for empirical characteristic functions: 500 draws from a
/// zero-mean normal with standard deviation 200 per coordinate, on a named
/// stream.
struct CharFnProbe {
  Matrix points;  // n_points x n_features

  static CharFnProbe make(int n_features, std::uint64_t seed, int n_points = 500,
                          double stddev = 200.0);
};

/// Empirical characteristic function of the samples at every probe point.
std::vector<std::complex<double>> empirical_cf(const std::vector<Vector>& samples,
                                               const CharFnProbe& probe);

double cf_max_difference(const std::vector<std::complex<double>>& a,
                         const std::vector<std::complex<double>>& b);

struct CfConvergenceCurve {
  std::vector<long> visit_counts;  // powers of two up to the total visit count
  Vector max_difference;           // max_j |f_k(u_j) - f_final(u_j)|
};

/// Deviation of the running empirical CF from the final one along the visit
/// sequence of a single state. Needs at least two visits.
CfConvergenceCurve cf_convergence_curve(const std::vector<Vector>& samples_in_visit_order,
                                        const CharFnProbe& probe);

struct TraceHistogram {
  Vector bin_lo;
  Vector density;  // normalized to sum 1
  double bin_width = 0;
  long samples = 0;
};

/// Normalized histogram of one trace component over the samples collected at
/// a state. Throws std::domain_error when the state was never visited.
TraceHistogram conditional_trace_histogram(const std::vector<Vector>& samples, int component,
                                           int bins = 60);

struct CycleReport {
  double max_product = 0;
  std::vector<int> max_cycle;  // states along the best cycle
  long cycles_inspected = 0;
  bool unbounded_predicted = false;  // max_product > 1
};

/// Searches simple cycles (up to max_length edges) of the transition support
/// graph, scoring each by prod lambda * gamma(s') * rho(s,s') along its
/// edges. A product above 1 predicts almost-surely unbounded traces for the
/// constant-lambda iteration. Throws std::domain_error when the cap admits
/// no cycle at all.
CycleReport cycle_unboundedness_check(const TabularMdp& mdp, double lambda, int max_length = 12);

}  // namespace gbetd
