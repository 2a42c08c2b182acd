#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gbetd/lambda_scheme.hpp"
#include "gbetd/linalg.hpp"
#include "gbetd/mdp.hpp"
#include "gbetd/rng.hpp"

namespace gbetd {

/// One behavior-policy transition together with everything TD-style consumers
/// need: the trace paired with the transition (e_{t-1}) and the updated one.
struct TransitionRecord {
  long step = 0;       // t after the update
  int s_prev = 0;      // S_{t-1}
  int s_next = 0;      // S_t
  double rho_prev = 0; // rho(S_{t-1}, S_t)
  double gamma_t = 0;  // gamma(S_t)
  double lambda_t = 0;
  double reward_prev = 0;  // R_{t-1} = r(S_{t-1}, S_t)
  Vector trace_prev;       // e_{t-1}
  Vector trace;            // e_t
};

struct TraceRunConfig {
  std::uint64_t seed = 0;
  std::optional<int> initial_state;  // default: sampled from zeta_S
  Vector initial_trace;              // default: zero vector
  double reward_noise_std = 0.0;     // optional zero-mean gaussian reward noise
  std::function<double(int)> interest;  // optional i(y) feature weighting
};

/// Drives (S_t, y_t, e_t) under the behavior policy. Single-owner, mutable;
/// run independent seeds in parallel instead of sharing one process.
class TraceProcess {
 public:
  TraceProcess(const TabularMdp& mdp, const FeatureMap& features, SchemePtr scheme,
               TraceRunConfig config);

  TransitionRecord step();

  int state() const { return state_; }
  int memory() const { return memory_; }
  const Vector& trace() const { return trace_; }
  long step_count() const { return step_; }

 private:
  const TabularMdp& mdp_;
  const FeatureMap& features_;
  SchemePtr scheme_;
  TraceRunConfig config_;
  Matrix rho_;
  RngStream transitions_;
  RngStream noise_;
  int state_ = 0;
  int memory_ = 0;
  Vector trace_;
  long step_ = 0;
};

struct StatePartition {
  std::vector<int> block_of_state;  // state -> block in [0, num_blocks)
  int num_blocks = 0;
};
StatePartition make_partition(std::vector<int> block_of_state);

/// Composite variant: one trace per partition block, each with its own
/// scheme; the feature increment goes only to the block owning S_t. The
/// emitted record carries the summed trace.
class CompositeTraceProcess {
 public:
  CompositeTraceProcess(const TabularMdp& mdp, const FeatureMap& features,
                        std::vector<SchemePtr> schemes, StatePartition partition,
                        TraceRunConfig config);

  TransitionRecord step();

  const Vector& block_trace(int i) const { return traces_[i]; }
  Vector summed_trace() const;
  int state() const { return state_; }

 private:
  const TabularMdp& mdp_;
  const FeatureMap& features_;
  std::vector<SchemePtr> schemes_;
  StatePartition partition_;
  Matrix rho_;
  RngStream transitions_;
  RngStream noise_;
  double noise_gain_ = 0.0;
  int state_ = 0;
  std::vector<int> memories_;
  std::vector<Vector> traces_;
  long step_ = 0;
};

struct CouplingResult {
  Vector deviations;            // ||e_t - e_hat_t|| for t = 0..steps
  double final_deviation = 0;
  bool per_step_bound_ok = true;   // Delta_t <= gamma_t rho_{t-1} Delta_{t-1}
  double max_per_step_excess = 0;  // worst Delta_t - gamma rho Delta_{t-1}
  bool pathwise_bound_ok = true;   // Delta_t <= Delta_0 prod gamma_k rho_{k-1}
  double max_pathwise_excess = 0;
};

/// Runs two trace sequences on one shared state trajectory, starting from
/// different initial traces, and checks the contraction bounds along the way.
CouplingResult coupling_experiment(const TabularMdp& mdp, const FeatureMap& features,
                                   const SchemePtr& scheme, const Vector& e0,
                                   const Vector& e0_hat, long steps, std::uint64_t seed);

struct TraceStats {
  double max_norm = 0;
  Vector tail_x;      // thresholds
  Vector tail_frac;   // fraction of steps with ||e_t|| > x
  double ball_radius = 0;
  int excursion_min_length = 0;
  double excursion_bin_width = 0;
  std::vector<double> excursion_bin_lo;   // histogram of excursion lengths
  std::vector<long> excursion_bin_count;
  long excursions_counted = 0;
};

/// Statistics over a norm series: tail fractions on a threshold grid and a
/// histogram of excursion lengths outside { ||e|| <= ball_radius }, keeping
/// only excursions longer than min_length steps.
TraceStats compute_trace_stats(const std::vector<double>& norms, double ball_radius = 100.0,
                               int min_length = 10, double bin_width = 5.0,
                               const Vector& tail_grid = {});

/// Append-only CSV stream of transition records (full precision): one row per
/// step with the transition, its weights and the updated trace components.
class RecordLogger {
 public:
  RecordLogger(const std::string& path, int n_features);
  ~RecordLogger();
  RecordLogger(const RecordLogger&) = delete;
  RecordLogger& operator=(const RecordLogger&) = delete;
  void append(const TransitionRecord& rec);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gbetd
