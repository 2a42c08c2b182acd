#include "gbetd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gbetd/rng.hpp"

namespace gbetd {

CharFnProbe CharFnProbe::make(int n_features, std::uint64_t seed, int n_points, double stddev) {
  CharFnProbe p;
  p.points = Matrix(n_points, n_features);
  RngStream rng(seed, RngStreamId::kProbe);
  for (int i = 0; i < n_points; ++i)
    for (int j = 0; j < n_features; ++j) p.points(i, j) = stddev * rng.next_gaussian();
  return p;
}

std::vector<std::complex<double>> empirical_cf(const std::vector<Vector>& samples,
                                               const CharFnProbe& probe) {
  const int np = probe.points.rows();
  std::vector<std::complex<double>> sums(np, {0.0, 0.0});
  for (const Vector& e : samples) {
    for (int j = 0; j < np; ++j) {
      double arg = 0.0;
      const double* u = probe.points.row_data(j);
      for (size_t i = 0; i < e.size(); ++i) arg += u[i] * e[i];
      sums[j] += std::complex<double>(std::cos(arg), std::sin(arg));
    }
  }
  if (!samples.empty())
    for (auto& z : sums) z /= static_cast<double>(samples.size());
  return sums;
}

double cf_max_difference(const std::vector<std::complex<double>>& a,
                         const std::vector<std::complex<double>>& b) {
  double m = 0.0;
  for (size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

CfConvergenceCurve cf_convergence_curve(const std::vector<Vector>& samples,
                                        const CharFnProbe& probe) {
  const long total = static_cast<long>(samples.size());
  if (total < 2) throw std::domain_error("cf_convergence_curve: needs at least two visits");
  const int np = probe.points.rows();

  std::vector<long> checkpoints;
  for (long k = 1; k < total; k *= 2) checkpoints.push_back(k);
  checkpoints.push_back(total);

  std::vector<std::complex<double>> sums(np, {0.0, 0.0});
  std::vector<std::vector<std::complex<double>>> snapshots;
  snapshots.reserve(checkpoints.size());
  size_t next_cp = 0;
  for (long k = 0; k < total; ++k) {
    const Vector& e = samples[k];
    for (int j = 0; j < np; ++j) {
      double arg = 0.0;
      const double* u = probe.points.row_data(j);
      for (size_t i = 0; i < e.size(); ++i) arg += u[i] * e[i];
      sums[j] += std::complex<double>(std::cos(arg), std::sin(arg));
    }
    while (next_cp < checkpoints.size() && k + 1 == checkpoints[next_cp]) {
      std::vector<std::complex<double>> snap(sums);
      for (auto& z : snap) z /= static_cast<double>(k + 1);
      snapshots.push_back(std::move(snap));
      ++next_cp;
    }
  }

  CfConvergenceCurve curve;
  const auto& final_cf = snapshots.back();
  for (size_t c = 0; c < checkpoints.size(); ++c) {
    curve.visit_counts.push_back(checkpoints[c]);
    curve.max_difference.push_back(cf_max_difference(snapshots[c], final_cf));
  }
  return curve;
}

TraceHistogram conditional_trace_histogram(const std::vector<Vector>& samples, int component,
                                           int bins) {
  if (samples.empty())
    throw std::domain_error("conditional_trace_histogram: state never visited");
  TraceHistogram h;
  h.samples = static_cast<long>(samples.size());
  double lo = samples[0][component], hi = lo;
  for (const Vector& e : samples) {
    lo = std::min(lo, e[component]);
    hi = std::max(hi, e[component]);
  }
  if (hi <= lo) hi = lo + 1.0;
  h.bin_width = (hi - lo) / bins;
  h.bin_lo.resize(bins);
  h.density.assign(bins, 0.0);
  for (int b = 0; b < bins; ++b) h.bin_lo[b] = lo + b * h.bin_width;
  for (const Vector& e : samples) {
    int b = static_cast<int>((e[component] - lo) / h.bin_width);
    b = std::clamp(b, 0, bins - 1);
    h.density[b] += 1.0;
  }
  for (double& d : h.density) d /= h.samples;
  return h;
}

namespace {

struct CycleSearch {
  const Matrix* weight;
  int n;
  int max_len;
  CycleReport* report;
  std::vector<char> on_path;
  std::vector<int> path;

  void dfs(int start, int node, double product, int depth) {
    if (depth > max_len) return;
    const Matrix& w = *weight;
    for (int next = 0; next < n; ++next) {
      if (w(node, next) < 0.0) continue;  // absent edge
      const double p = product * w(node, next);
      if (next == start) {
        ++report->cycles_inspected;
        if (report->max_cycle.empty() || p > report->max_product) {
          report->max_product = p;
          report->max_cycle = path;
          report->max_cycle.push_back(start);
        }
        continue;
      }
      if (next < start || on_path[next]) continue;  // canonical start = min node
      on_path[next] = 1;
      path.push_back(next);
      dfs(start, next, p, depth + 1);
      path.pop_back();
      on_path[next] = 0;
    }
  }
};

}  // namespace

CycleReport cycle_unboundedness_check(const TabularMdp& mdp, double lambda, int max_length) {
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("cycle check: lambda must lie in [0,1]");
  const int n = mdp.n_states;
  // Edge weights lambda * gamma(s') * rho(s,s') on the support of P°; -1
  // marks a missing edge (weights themselves can legitimately be 0).
  Matrix w(n, n, -1.0);
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t)
      if (mdp.p_behavior(s, t) > 0.0)
        w(s, t) = lambda * mdp.discount[t] * importance_ratio(mdp, s, t);

  CycleReport rep;
  CycleSearch search{&w, n, max_length, &rep, std::vector<char>(n, 0), {}};
  for (int start = 0; start < n; ++start) {
    search.on_path.assign(n, 0);
    search.on_path[start] = 1;
    search.path = {start};
    search.dfs(start, start, 1.0, 1);
  }
  if (rep.cycles_inspected == 0)
    throw std::domain_error("cycle check: no cycle within the length cap");
  rep.unbounded_predicted = rep.max_product > 1.0;
  return rep;
}

}  // namespace gbetd
