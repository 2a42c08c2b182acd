#include "gbetd/trace.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "gbetd/csv.hpp"

namespace gbetd {

namespace {

int pick_initial_state(const TabularMdp& mdp, const TraceRunConfig& config) {
  if (config.initial_state) {
    const int s = *config.initial_state;
    if (s < 0 || s >= mdp.n_states) throw std::invalid_argument("initial state out of range");
    return s;
  }
  const Vector zeta = behavior_stationary_dist(mdp);
  RngStream init(config.seed, RngStreamId::kInit);
  return init.next_categorical(zeta.data(), mdp.n_states);
}

Vector initial_trace_or_zero(const TraceRunConfig& config, int n_features) {
  if (config.initial_trace.empty()) return Vector(n_features, 0.0);
  if (static_cast<int>(config.initial_trace.size()) != n_features)
    throw std::invalid_argument("initial trace dimension mismatch");
  return config.initial_trace;
}

}  // namespace

TraceProcess::TraceProcess(const TabularMdp& mdp, const FeatureMap& features, SchemePtr scheme,
                           TraceRunConfig config)
    : mdp_(mdp),
      features_(features),
      scheme_(std::move(scheme)),
      config_(std::move(config)),
      rho_(importance_ratio_matrix(mdp)),
      transitions_(config_.seed, RngStreamId::kTransition),
      noise_(config_.seed, RngStreamId::kRewardNoise) {
  state_ = pick_initial_state(mdp_, config_);
  memory_ = scheme_->memory_init(state_);
  trace_ = initial_trace_or_zero(config_, features_.n_features);
}

TransitionRecord TraceProcess::step() {
  TransitionRecord rec;
  rec.s_prev = state_;
  rec.trace_prev = trace_;

  const int s_next = transitions_.next_categorical(mdp_.p_behavior.row_data(state_),
                                                   mdp_.n_states);
  rec.s_next = s_next;
  rec.rho_prev = rho_(state_, s_next);
  rec.gamma_t = mdp_.discount[s_next];
  rec.reward_prev = mdp_.reward(state_, s_next);
  if (config_.reward_noise_std > 0.0)
    rec.reward_prev += config_.reward_noise_std * noise_.next_gaussian();

  memory_ = scheme_->memory_step(memory_, s_next);
  const double lam = scheme_->lambda(memory_, trace_, rec.gamma_t, rec.rho_prev);
  rec.lambda_t = lam;

  const double mult = lam * rec.gamma_t * rec.rho_prev;
  double weight = 1.0;
  if (config_.interest) {
    weight = config_.interest(memory_);
    if (weight < 0.0) throw std::invalid_argument("interest weight must be nonnegative");
  }
  for (int i = 0; i < features_.n_features; ++i)
    trace_[i] = mult * trace_[i] + weight * features_.phi(s_next, i);

#ifndef NDEBUG
  // Trace-bound invariant for schemes that guarantee one.
  if (auto c = scheme_->claimed_trace_bound(memory_); c && weight == 1.0)
    assert(norm2(trace_) <= *c + norm2(features_.phi.row(s_next)) + 1e-9);
#endif

  state_ = s_next;
  rec.step = ++step_;
  rec.trace = trace_;
  return rec;
}

StatePartition make_partition(std::vector<int> block_of_state) {
  StatePartition p;
  p.num_blocks = 0;
  for (int b : block_of_state) {
    if (b < 0) throw std::invalid_argument("partition: negative block index");
    p.num_blocks = std::max(p.num_blocks, b + 1);
  }
  p.block_of_state = std::move(block_of_state);
  return p;
}

CompositeTraceProcess::CompositeTraceProcess(const TabularMdp& mdp, const FeatureMap& features,
                                             std::vector<SchemePtr> schemes,
                                             StatePartition partition, TraceRunConfig config)
    : mdp_(mdp),
      features_(features),
      schemes_(std::move(schemes)),
      partition_(std::move(partition)),
      rho_(importance_ratio_matrix(mdp)),
      transitions_(config.seed, RngStreamId::kTransition),
      noise_(config.seed, RngStreamId::kRewardNoise) {
  if (static_cast<int>(partition_.block_of_state.size()) != mdp.n_states)
    throw std::invalid_argument("partition does not cover the state space");
  if (static_cast<int>(schemes_.size()) != partition_.num_blocks)
    throw std::invalid_argument("one scheme per partition block required");
  noise_gain_ = config.reward_noise_std;
  state_ = pick_initial_state(mdp_, config);
  memories_.resize(schemes_.size());
  traces_.assign(schemes_.size(), Vector(features_.n_features, 0.0));
  for (size_t i = 0; i < schemes_.size(); ++i) memories_[i] = schemes_[i]->memory_init(state_);
}

Vector CompositeTraceProcess::summed_trace() const {
  Vector e(features_.n_features, 0.0);
  for (const Vector& t : traces_) axpy(1.0, t, e);
  return e;
}

TransitionRecord CompositeTraceProcess::step() {
  TransitionRecord rec;
  rec.s_prev = state_;
  rec.trace_prev = summed_trace();

  const int s_next = transitions_.next_categorical(mdp_.p_behavior.row_data(state_),
                                                   mdp_.n_states);
  rec.s_next = s_next;
  rec.rho_prev = rho_(state_, s_next);
  rec.gamma_t = mdp_.discount[s_next];
  rec.reward_prev = mdp_.reward(state_, s_next);
  if (noise_gain_ > 0.0) rec.reward_prev += noise_gain_ * noise_.next_gaussian();

  const int owner = partition_.block_of_state[s_next];
  double lambda_owner = 0.0;
  for (size_t i = 0; i < schemes_.size(); ++i) {
    memories_[i] = schemes_[i]->memory_step(memories_[i], s_next);
    const double lam = schemes_[i]->lambda(memories_[i], traces_[i], rec.gamma_t, rec.rho_prev);
    if (static_cast<int>(i) == owner) lambda_owner = lam;
    const double mult = lam * rec.gamma_t * rec.rho_prev;
    Vector& e = traces_[i];
    for (int j = 0; j < features_.n_features; ++j) {
      e[j] = mult * e[j];
      if (static_cast<int>(i) == owner) e[j] += features_.phi(s_next, j);
    }
  }
  rec.lambda_t = lambda_owner;

  state_ = s_next;
  rec.step = ++step_;
  rec.trace = summed_trace();
  return rec;
}

CouplingResult coupling_experiment(const TabularMdp& mdp, const FeatureMap& features,
                                   const SchemePtr& scheme, const Vector& e0,
                                   const Vector& e0_hat, long steps, std::uint64_t seed) {
  if (static_cast<int>(e0.size()) != features.n_features ||
      static_cast<int>(e0_hat.size()) != features.n_features)
    throw std::invalid_argument("coupling: trace dimension mismatch");

  const Matrix rho = importance_ratio_matrix(mdp);
  TraceRunConfig cfg;
  cfg.seed = seed;
  int s = pick_initial_state(mdp, cfg);
  int y = scheme->memory_init(s);
  RngStream transitions(seed, RngStreamId::kTransition);

  Vector e = e0, eh = e0_hat;
  CouplingResult out;
  out.deviations.reserve(steps + 1);
  out.deviations.push_back(norm2(e - eh));
  double product_bound = out.deviations[0];

  for (long t = 1; t <= steps; ++t) {
    const int s_next = transitions.next_categorical(mdp.p_behavior.row_data(s), mdp.n_states);
    const double r = rho(s, s_next);
    const double g = mdp.discount[s_next];
    y = scheme->memory_step(y, s_next);
    const double lam = scheme->lambda(y, e, g, r);
    const double lam_hat = scheme->lambda(y, eh, g, r);

    const double prev_dev = out.deviations.back();
    for (int i = 0; i < features.n_features; ++i) {
      e[i] = lam * g * r * e[i] + features.phi(s_next, i);
      eh[i] = lam_hat * g * r * eh[i] + features.phi(s_next, i);
    }
    const double dev = norm2(e - eh);
    out.deviations.push_back(dev);

    const double step_bound = g * r * prev_dev;
    const double step_excess = dev - step_bound;
    if (step_excess > 1e-12 * std::max(1.0, prev_dev)) out.per_step_bound_ok = false;
    out.max_per_step_excess = std::max(out.max_per_step_excess, step_excess);

    product_bound *= g * r;
    const double path_excess = dev - product_bound;
    if (path_excess > 1e-12 * std::max(1.0, product_bound)) out.pathwise_bound_ok = false;
    out.max_pathwise_excess = std::max(out.max_pathwise_excess, path_excess);

    s = s_next;
  }
  out.final_deviation = out.deviations.back();
  return out;
}

TraceStats compute_trace_stats(const std::vector<double>& norms, double ball_radius,
                               int min_length, double bin_width, const Vector& tail_grid) {
  TraceStats st;
  st.ball_radius = ball_radius;
  st.excursion_min_length = min_length;
  st.excursion_bin_width = bin_width;
  if (norms.empty()) return st;

  for (double x : norms) st.max_norm = std::max(st.max_norm, x);

  if (tail_grid.empty()) {
    const int points = 100;
    for (int i = 0; i < points; ++i)
      st.tail_x.push_back(st.max_norm * (i + 1) / static_cast<double>(points));
  } else {
    st.tail_x = tail_grid;
  }
  std::vector<double> sorted(norms);
  std::sort(sorted.begin(), sorted.end());
  for (double x : st.tail_x) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    st.tail_frac.push_back(static_cast<double>(sorted.end() - it) / sorted.size());
  }

  // Excursion lengths outside the ball, ignoring short ones.
  std::vector<long> lengths;
  long run = 0;
  for (double x : norms) {
    if (x > ball_radius) {
      ++run;
    } else if (run > 0) {
      if (run > min_length) lengths.push_back(run);
      run = 0;
    }
  }
  if (run > min_length) lengths.push_back(run);
  st.excursions_counted = static_cast<long>(lengths.size());
  if (!lengths.empty() && bin_width > 0) {
    const long max_len = *std::max_element(lengths.begin(), lengths.end());
    const int bins = static_cast<int>((max_len - min_length) / bin_width) + 1;
    st.excursion_bin_lo.resize(bins);
    st.excursion_bin_count.assign(bins, 0);
    for (int b = 0; b < bins; ++b) st.excursion_bin_lo[b] = min_length + 1 + b * bin_width;
    for (long len : lengths) {
      const int b = static_cast<int>((len - min_length - 1) / bin_width);
      ++st.excursion_bin_count[b];
    }
  }
  return st;
}

struct RecordLogger::Impl {
  CsvWriter csv;
  int n_features;
};

RecordLogger::RecordLogger(const std::string& path, int n_features) {
  std::vector<std::string> header{"step",   "s_prev", "s_next", "rho_prev",
                                  "gamma",  "lambda", "reward"};
  for (int i = 0; i < n_features; ++i) header.push_back("e_" + std::to_string(i));
  impl_ = std::make_unique<Impl>(Impl{CsvWriter(path, header), n_features});
}

RecordLogger::~RecordLogger() = default;

void RecordLogger::append(const TransitionRecord& rec) {
  std::string row = CsvWriter::fmt(rec.step) + "," + std::to_string(rec.s_prev) + "," +
                    std::to_string(rec.s_next) + "," + CsvWriter::fmt(rec.rho_prev) + "," +
                    CsvWriter::fmt(rec.gamma_t) + "," + CsvWriter::fmt(rec.lambda_t) + "," +
                    CsvWriter::fmt(rec.reward_prev);
  for (int i = 0; i < impl_->n_features; ++i) row += "," + CsvWriter::fmt(rec.trace[i]);
  impl_->csv.raw_row(row);
}

}  // namespace gbetd
