#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gbetd/lambda_scheme.hpp"
#include "gbetd/mdp.hpp"

namespace gbetd {

struct SchemeConfig {
  std::string type = "scaling";  // constant|scaling|retrace|truncated_retrace|composite
  double lambda = 0.0;
  double c = 50.0;
  double k = 1.0;
  double beta = 1.0;
  std::vector<SchemeConfig> blocks;  // composite children
  std::vector<int> partition;        // composite: state -> block

  std::string label() const;
};

SchemePtr build_scheme(const SchemeConfig& cfg, int n_states);

struct ExperimentConfig {
  std::string environment = "toy";  // toy | two_state | mcar | file:<path>
  long run_length = 300000;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  long checkpoint_every = 2000;
  std::string out_dir = "out";
  std::vector<SchemeConfig> schemes;
  bool slow = false;
  int n_threads = 2;

  // diagnostics knobs
  long trace_steps = 800000;
  double trace_ball_radius = 100.0;
  double excursion_bin_width = 5.0;
  long norm_downsample = 100;
  bool record_log = false;  // stream full transition records to CSV
  double reward_noise_std = 0.0;

  // Mountain Car knobs
  long mcar_effective_iters = 600000;
  long mcar_weight_iters = 800000;
  int mcar_rollouts_per_point = 600;

  void validate() const;  // throws std::invalid_argument
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_file(const std::string& path);

/// Hash over the semantic fields (environment, lengths, seeds, schemes, ...).
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct TabularLstdRun {
  Vector theta;
  double residual_norm = 0;
  bool least_squares_fallback = false;
  double max_trace_norm = 0;
};

/// One off-policy LSTD run on a tabular environment; handles composite
/// scheme configs via the multi-trace process. When checkpoint_every > 0 the
/// callback receives the intermediate solution at that cadence.
TabularLstdRun run_tabular_lstd(
    const TabularMdp& mdp, const FeatureMap& features, const SchemeConfig& scheme, long steps,
    std::uint64_t seed, double trace_clamp = 0.0 /* <= 0: none */, long checkpoint_every = 0,
    const std::function<void(long, const Vector&)>& on_checkpoint = {});

enum class RecipeStatus { kOk = 0, kCheckFailed = 3 };

/// Named experiment recipes: trace-stats, ergodicity, toy-lstd-sweep,
/// toy-td-curve, mcar-suite, counterexample, theorem2-check. Writes CSV
/// artifacts plus a manifest into cfg.out_dir. Throws std::invalid_argument
/// for unknown recipes or invalid configs, std::runtime_error for I/O.
RecipeStatus run_recipe(const std::string& name, const ExperimentConfig& cfg);

std::vector<std::string> recipe_names();

/// Reshapes a recipe's outputs into tidy long-format (series,x,y,seed) CSVs.
void emit_plot_data(const std::string& recipe, const std::string& out_dir);

struct AggregateRow {
  std::string series;
  double x = 0;
  double mean = 0;
  double stddev = 0;
  long n = 0;
};
/// Mean/stddev per (series, x) cell of long-format points; deterministic order.
std::vector<AggregateRow> aggregate_mean_std(
    const std::vector<std::tuple<std::string, double, double>>& points);

}  // namespace gbetd
