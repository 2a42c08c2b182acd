#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <thread>
#include <tuple>

#include "gbetd/bellman.hpp"
#include "gbetd/csv.hpp"
#include "gbetd/diagnostics.hpp"
#include "gbetd/environments.hpp"
#include "gbetd/experiment.hpp"
#include "gbetd/lstd.hpp"
#include "gbetd/trace.hpp"

namespace gbetd {

namespace fs = std::filesystem;

namespace {

MdpFile load_environment(const ExperimentConfig& cfg) {
  if (cfg.environment == "toy") return build_toy();
  if (cfg.environment == "two_state") return build_two_state();
  if (cfg.environment.rfind("file:", 0) == 0) return load_mdp_file(cfg.environment.substr(5));
  throw std::invalid_argument("recipe needs a tabular environment, got " + cfg.environment);
}

void write_manifest(const std::string& dir, const std::string& recipe,
                    const ExperimentConfig& cfg) {
  std::ofstream out(dir + "/manifest_" + recipe + ".txt");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << "recipe " << recipe << "\n";
  out << "config_hash " << config_hash(cfg) << "\n";
  out << "environment " << cfg.environment << "\n";
  out << "seeds";
  for (auto s : cfg.seeds) out << " " << s;
  out << "\n";
}

std::string out_path(const ExperimentConfig& cfg, const std::string& file) {
  return cfg.out_dir + "/" + file;
}

void ensure_out_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + cfg.out_dir);
}

// Minimal CSV reader for the recipe outputs this module itself writes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("csv column missing: " + name);
  }
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else if (!cells.empty()) {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Shared tabular LSTD cell
// ---------------------------------------------------------------------------

}  // namespace

TabularLstdRun run_tabular_lstd(const TabularMdp& mdp, const FeatureMap& features,
                                const SchemeConfig& scheme, long steps, std::uint64_t seed,
                                double trace_clamp, long checkpoint_every,
                                const std::function<void(long, const Vector&)>& on_checkpoint) {
  std::optional<double> clamp;
  if (trace_clamp > 0.0) clamp = trace_clamp;
  LstdAccumulator acc(features.n_features, clamp);
  TabularLstdRun out;

  auto consume = [&](const TransitionRecord& rec, long t) {
    acc.accumulate(rec, features);
    out.max_trace_norm = std::max(out.max_trace_norm, norm2(rec.trace));
    if (checkpoint_every > 0 && on_checkpoint &&
        ((t + 1) % checkpoint_every == 0 || t + 1 == steps))
      on_checkpoint(t + 1, acc.solve().theta);
  };

  TraceRunConfig rc;
  rc.seed = seed;
  if (scheme.type == "composite") {
    std::vector<SchemePtr> blocks;
    for (const SchemeConfig& b : scheme.blocks) blocks.push_back(build_scheme(b, mdp.n_states));
    CompositeTraceProcess proc(mdp, features, std::move(blocks),
                               make_partition(scheme.partition), rc);
    for (long t = 0; t < steps; ++t) consume(proc.step(), t);
  } else {
    TraceProcess proc(mdp, features, build_scheme(scheme, mdp.n_states), rc);
    for (long t = 0; t < steps; ++t) consume(proc.step(), t);
  }
  const LstdSolution sol = acc.solve();
  out.theta = sol.theta;
  out.residual_norm = sol.residual_norm;
  out.least_squares_fallback = sol.least_squares_fallback;
  return out;
}

std::vector<AggregateRow> aggregate_mean_std(
    const std::vector<std::tuple<std::string, double, double>>& points) {
  std::map<std::pair<std::string, double>, std::pair<Vector, int>> cells;
  for (const auto& [series, x, y] : points) cells[{series, x}].first.push_back(y);
  std::vector<AggregateRow> rows;
  for (const auto& [key, cell] : cells) {
    AggregateRow r;
    r.series = key.first;
    r.x = key.second;
    r.n = static_cast<long>(cell.first.size());
    double mean = 0;
    for (double y : cell.first) mean += y;
    mean /= r.n;
    double var = 0;
    for (double y : cell.first) var += (y - mean) * (y - mean);
    r.mean = mean;
    r.stddev = r.n > 1 ? std::sqrt(var / (r.n - 1)) : 0.0;
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

// ---------------------------------------------------------------------------
// trace-stats: norm series, tail fractions and excursion histogram for
// constant lambda = 1 and the scaling scheme.
// ---------------------------------------------------------------------------

RecipeStatus recipe_trace_stats(const ExperimentConfig& cfg) {
  const MdpFile env = load_environment(cfg);
  std::vector<SchemeConfig> schemes = cfg.schemes;
  if (schemes.empty()) {
    SchemeConfig td1;
    td1.type = "constant";
    td1.lambda = 1.0;
    SchemeConfig scaling;
    scaling.type = "scaling";
    scaling.c = 50.0;
    schemes = {td1, scaling};
  }

  for (const SchemeConfig& sc : schemes) {
    TraceRunConfig rc;
    rc.seed = cfg.seeds[0];
    rc.reward_noise_std = cfg.reward_noise_std;
    TraceProcess proc(env.mdp, env.features, build_scheme(sc, env.mdp.n_states), rc);
    std::unique_ptr<RecordLogger> logger;
    if (cfg.record_log)
      logger = std::make_unique<RecordLogger>(
          out_path(cfg, "trace_records_" + sc.label() + ".csv"), env.features.n_features);
    std::vector<double> norms;
    norms.reserve(cfg.trace_steps);
    for (long t = 0; t < cfg.trace_steps; ++t) {
      const TransitionRecord rec = proc.step();
      if (logger) logger->append(rec);
      norms.push_back(norm2(rec.trace));
    }

    const TraceStats st = compute_trace_stats(norms, cfg.trace_ball_radius, 10,
                                              cfg.excursion_bin_width);
    {
      CsvWriter w(out_path(cfg, "trace_norms_" + sc.label() + ".csv"), {"t", "norm"});
      for (size_t t = 0; t < norms.size(); t += cfg.norm_downsample)
        w.row(static_cast<long>(t + 1), norms[t]);
    }
    {
      CsvWriter w(out_path(cfg, "trace_tail_" + sc.label() + ".csv"), {"x", "fraction"});
      for (size_t i = 0; i < st.tail_x.size(); ++i) w.row(st.tail_x[i], st.tail_frac[i]);
    }
    {
      CsvWriter w(out_path(cfg, "trace_excursions_" + sc.label() + ".csv"),
                  {"length_bin_lo", "count"});
      for (size_t i = 0; i < st.excursion_bin_lo.size(); ++i)
        w.row(st.excursion_bin_lo[i], st.excursion_bin_count[i]);
    }
  }

  // Cycle analysis that accompanies the constant-lambda trace plots.
  {
    CsvWriter w(out_path(cfg, "cycle_report.csv"),
                {"lambda", "max_product", "unbounded_predicted", "cycle"});
    for (double lam : {0.0, 0.5, 1.0}) {
      const CycleReport rep = cycle_unboundedness_check(env.mdp, lam);
      std::string cyc;
      for (int s : rep.max_cycle) cyc += (cyc.empty() ? "" : ">") + std::to_string(s);
      w.row(lam, rep.max_product, rep.unbounded_predicted ? 1L : 0L, cyc);
    }
  }
  return RecipeStatus::kOk;
}

// ---------------------------------------------------------------------------
// ergodicity: conditional trace histograms and characteristic-function
// convergence curves for the monitored states.
// ---------------------------------------------------------------------------

struct StateSamples {
  std::vector<std::vector<Vector>> by_state;
};

StateSamples collect_samples(const TabularMdp& mdp, const FeatureMap& features,
                             const SchemePtr& scheme, long steps, std::uint64_t seed,
                             const Vector& e0) {
  StateSamples out;
  out.by_state.resize(mdp.n_states);
  TraceRunConfig rc;
  rc.seed = seed;
  rc.initial_trace = e0;
  TraceProcess proc(mdp, features, scheme, rc);
  for (long t = 0; t < steps; ++t) {
    const TransitionRecord rec = proc.step();
    out.by_state[rec.s_next].push_back(rec.trace);
  }
  return out;
}

RecipeStatus recipe_ergodicity(const ExperimentConfig& cfg) {
  const MdpFile env = load_environment(cfg);
  SchemeConfig sc;
  if (!cfg.schemes.empty()) {
    sc = cfg.schemes[0];
  } else {
    sc.type = "scaling";
    sc.c = 50.0;
  }
  const SchemePtr scheme = build_scheme(sc, env.mdp.n_states);
  const int monitored[3] = {kToyCentralState, kToyNortheastMiddle, kToySoutheastFirst};

  const Vector e0_a(env.features.n_features, 0.0);
  Vector e0_b(env.features.n_features, 0.0);
  for (size_t i = 0; i < e0_b.size(); ++i) e0_b[i] = 30.0 - 12.0 * i;
  const std::uint64_t seed_a = cfg.seeds[0];
  const std::uint64_t seed_b = cfg.seeds.size() > 1 ? cfg.seeds[1] : cfg.seeds[0] + 1;

  const StateSamples run_a =
      collect_samples(env.mdp, env.features, scheme, cfg.trace_steps, seed_a, e0_a);
  const StateSamples run_b =
      collect_samples(env.mdp, env.features, scheme, cfg.trace_steps, seed_b, e0_b);

  const CharFnProbe probe = CharFnProbe::make(env.features.n_features, cfg.seeds[0]);

  for (int s : monitored) {
    const TraceHistogram h = conditional_trace_histogram(run_a.by_state[s], 0);
    CsvWriter w(out_path(cfg, "ergodicity_hist_s" + std::to_string(s) + ".csv"),
                {"bin_lo", "density"});
    for (size_t i = 0; i < h.bin_lo.size(); ++i) w.row(h.bin_lo[i], h.density[i]);
  }
  for (int s : monitored) {
    const CfConvergenceCurve curve = cf_convergence_curve(run_a.by_state[s], probe);
    CsvWriter w(out_path(cfg, "ergodicity_cf_s" + std::to_string(s) + ".csv"),
                {"visits", "max_diff"});
    for (size_t i = 0; i < curve.visit_counts.size(); ++i)
      w.row(curve.visit_counts[i], curve.max_difference[i]);
  }

  // Cross-run (same state, different trajectory and initial trace) and
  // cross-state (same run) final differences.
  CsvWriter w(out_path(cfg, "ergodicity_cross.csv"), {"comparison", "state", "max_diff"});
  for (int s : monitored) {
    const double d = cf_max_difference(empirical_cf(run_a.by_state[s], probe),
                                       empirical_cf(run_b.by_state[s], probe));
    w.row(std::string("cross_run"), s, d);
  }
  const double cross_state =
      cf_max_difference(empirical_cf(run_a.by_state[kToyNortheastMiddle], probe),
                        empirical_cf(run_a.by_state[kToySoutheastFirst], probe));
  w.row(std::string("cross_state"), kToySoutheastFirst, cross_state);
  return RecipeStatus::kOk;
}

// ---------------------------------------------------------------------------
// toy-lstd-sweep: scaling C grid and large constant lambdas, 10 seeds,
// normalized distances to the TD(1) solution.
// ---------------------------------------------------------------------------

struct SweepCell {
  std::string series;
  double param = 0;
  SchemeConfig scheme;
  std::uint64_t seed = 0;
  double distance = 0;
  double value_error = 0;
  std::vector<std::tuple<long, double, double>> checkpoints;  // step, distance, error
};

RecipeStatus recipe_toy_lstd_sweep(const ExperimentConfig& cfg) {
  const MdpFile env = load_environment(cfg);
  const long steps = cfg.run_length > 0 ? cfg.run_length : 300000;

  const Vector v_pi = value_function(env.mdp);
  const Vector zeta = behavior_stationary_dist(env.mdp);
  // TD(1) reference: the zeta-weighted projection of v_pi.
  const BellmanOperator td1 = exact_operator_state_dependent(env.mdp, Vector(21, 1.0));
  const Vector theta_td1 = projected_solution(td1, env.features, zeta, v_pi).theta_td;

  std::vector<SweepCell> cells;
  for (int c = 10; c <= 100; c += 10) {
    SchemeConfig sc;
    sc.type = "scaling";
    sc.c = c;
    for (std::uint64_t seed : cfg.seeds)
      cells.push_back({"scaling", static_cast<double>(c), sc, seed, 0, 0});
  }
  for (int i = 0; i <= 5; ++i) {
    const double lam = 0.9 + 0.02 * i;
    SchemeConfig sc;
    sc.type = "constant";
    sc.lambda = lam;
    for (std::uint64_t seed : cfg.seeds) cells.push_back({"constant", lam, sc, seed, 0, 0});
  }
  {
    SchemeConfig sc;
    sc.type = "retrace";
    sc.beta = 1.0;
    for (std::uint64_t seed : cfg.seeds) cells.push_back({"retrace", 1.0, sc, seed, 0, 0});
  }

  const int n_threads = std::max(1, cfg.n_threads);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
      SweepCell& cell = cells[i];
      auto on_checkpoint = [&](long step, const Vector& theta) {
        const SolutionMetrics m =
            solution_metrics(theta, theta_td1, env.features, v_pi, zeta);
        cell.checkpoints.emplace_back(step, m.param_distance, m.value_error);
      };
      const TabularLstdRun run = run_tabular_lstd(env.mdp, env.features, cell.scheme, steps,
                                                  cell.seed, 0.0, cfg.checkpoint_every,
                                                  on_checkpoint);
      const SolutionMetrics m =
          solution_metrics(run.theta, theta_td1, env.features, v_pi, zeta);
      cell.distance = m.param_distance;
      cell.value_error = m.value_error;
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  {
    CsvWriter w(out_path(cfg, "lstd_sweep.csv"),
                {"series", "param", "seed", "distance", "value_error"});
    for (const SweepCell& c : cells) w.row(c.series, c.param, c.seed, c.distance, c.value_error);
  }
  {
    CsvWriter w(out_path(cfg, "lstd_checkpoints.csv"),
                {"series", "param", "seed", "step", "distance", "value_error"});
    for (const SweepCell& c : cells)
      for (const auto& [step, dist, err] : c.checkpoints)
        w.row(c.series, c.param, c.seed, step, dist, err);
  }
  // Asymptotic constant-lambda reference curve on the same parameter grid.
  {
    CsvWriter w(out_path(cfg, "lstd_sweep_asymptotic.csv"),
                {"lambda", "distance", "value_error"});
    for (int i = 0; i <= 5; ++i) {
      const double lam = 0.9 + 0.02 * i;
      const BellmanOperator op =
          exact_operator_state_dependent(env.mdp, Vector(env.mdp.n_states, lam));
      const Vector theta = projected_solution(op, env.features, zeta, v_pi).theta_td;
      const SolutionMetrics m = solution_metrics(theta, theta_td1, env.features, v_pi, zeta);
      w.row(lam, m.param_distance, m.value_error);
    }
  }
  return RecipeStatus::kOk;
}

// ---------------------------------------------------------------------------
// toy-td-curve: asymptotic TD(lambda) solution quality over the lambda grid.
// ---------------------------------------------------------------------------

RecipeStatus recipe_toy_td_curve(const ExperimentConfig& cfg) {
  const MdpFile env = load_environment(cfg);
  const Vector v_pi = value_function(env.mdp);
  const Vector zeta = behavior_stationary_dist(env.mdp);
  const BellmanOperator td1 =
      exact_operator_state_dependent(env.mdp, Vector(env.mdp.n_states, 1.0));
  const Vector theta_td1 = projected_solution(td1, env.features, zeta, v_pi).theta_td;

  CsvWriter w(out_path(cfg, "td_curve.csv"), {"lambda", "distance", "value_error"});
  for (int i = 0; i <= 20; ++i) {
    const double lam = i / 20.0;
    const BellmanOperator op =
        exact_operator_state_dependent(env.mdp, Vector(env.mdp.n_states, lam));
    const Vector theta = projected_solution(op, env.features, zeta, v_pi).theta_td;
    const SolutionMetrics m = solution_metrics(theta, theta_td1, env.features, v_pi, zeta);
    w.row(lam, m.param_distance, m.value_error);
  }
  return RecipeStatus::kOk;
}

// ---------------------------------------------------------------------------
// counterexample: Appendix-style two-state table.
// ---------------------------------------------------------------------------

RecipeStatus recipe_counterexample(const ExperimentConfig& cfg) {
  const CounterexampleReport rep = counterexample_suite();
  CsvWriter w(out_path(cfg, "counterexample.csv"),
              {"quantity", "computed", "expected", "tolerance", "pass"});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      std::ostringstream name;
      name << "projected_matrix_" << i << j;
      w.row(name.str(), rep.projected_matrix(i, j), rep.projected_matrix_expected(i, j), 1e-3,
            std::abs(rep.projected_matrix(i, j) - rep.projected_matrix_expected(i, j)) < 1e-3
                ? 1L
                : 0L);
    }
  w.row(std::string("weighted_op_norm"), rep.weighted_op_norm, 1.31, 0.01,
        rep.norm_ok ? 1L : 0L);
  w.row(std::string("rank1_spectral_radius"), rep.rank1_spectral_radius, 1.10, 0.01,
        rep.sigma_ok ? 1L : 0L);
  w.row(std::string("eig_real_min_positive"), rep.eig_real_min, 0.0, 0.0,
        rep.eig_positive ? 1L : 0L);

  std::cout << "counterexample: matrix " << (rep.matrix_ok ? "pass" : "FAIL") << ", norm "
            << (rep.norm_ok ? "pass" : "FAIL") << " (" << rep.weighted_op_norm << "), sigma "
            << (rep.sigma_ok ? "pass" : "FAIL") << " (" << rep.rank1_spectral_radius
            << "), eigenvalues " << (rep.eig_positive ? "pass" : "FAIL") << "\n";
  return rep.pass() ? RecipeStatus::kOk : RecipeStatus::kCheckFailed;
}

// ---------------------------------------------------------------------------
// theorem2-check: LSTD limit vs projected-operator construction.
// ---------------------------------------------------------------------------

RecipeStatus recipe_theorem2(const ExperimentConfig& cfg) {
  const MdpFile env = load_environment(cfg);
  SchemeConfig sc;
  if (!cfg.schemes.empty()) {
    sc = cfg.schemes[0];
  } else {
    sc.type = "scaling";
    sc.c = 50.0;
  }
  Theorem2Config t2;
  t2.run_length = cfg.run_length > 0 ? cfg.run_length : 1000000;
  t2.seed = cfg.seeds[0];
  t2.mc.warmup_steps = 100000;
  t2.mc.samples_per_state = 20000;
  t2.mc.n_threads = cfg.n_threads;
  const Theorem2Report rep =
      verify_theorem2(env.mdp, env.features, build_scheme(sc, env.mdp.n_states), t2);

  // The Monte Carlo operator backing the right side, for inspection.
  {
    const BellmanOperator& op = rep.mc_op;
    CsvWriter w(out_path(cfg, "theorem2_operator.csv"),
                {"s", "s_next", "p_tilde", "p_se", "r_tilde", "r_se"});
    for (int s = 0; s < env.mdp.n_states; ++s)
      for (int t = 0; t < env.mdp.n_states; ++t)
        w.row(s, t, op.p_tilde(s, t), op.p_se(s, t), op.r_tilde[s], op.r_se[s]);
  }

  const int n = env.features.n_features;
  CsvWriter w(out_path(cfg, "theorem2.csv"), {"entry", "lhs", "rhs", "combined_se", "z"});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      std::ostringstream name;
      name << "A_" << i << j;
      const double se = rep.combined_a_se(i, j);
      w.row(name.str(), rep.lhs_a(i, j), rep.rhs_a(i, j), se,
            std::abs(rep.lhs_a(i, j) - rep.rhs_a(i, j)) / (se > 0 ? se : 1e-300));
    }
    std::ostringstream name;
    name << "b_" << i;
    const double se = rep.combined_b_se[i];
    w.row(name.str(), rep.lhs_b[i], rep.rhs_b[i], se,
          std::abs(rep.lhs_b[i] - rep.rhs_b[i]) / (se > 0 ? se : 1e-300));
  }
  std::cout << "theorem2-check: max_z = " << rep.max_z
            << (rep.inconclusive ? " (inconclusive)" : "") << " -> "
            << (rep.pass ? "pass" : "FAIL") << "\n";
  return rep.pass ? RecipeStatus::kOk : RecipeStatus::kCheckFailed;
}

// ---------------------------------------------------------------------------
// mcar-suite (slow): shared-trajectory LSTD comparison on Mountain Car.
// ---------------------------------------------------------------------------

struct McarRunner {
  std::string label;
  enum class Kind { kScaling, kRetrace, kConstant, kComposite } kind;
  double c1 = 0, c2 = 0, lambda = 0, beta = 1.0;
  double clamp = 0;  // constrained variant when > 0

  Vector e, e2;  // second trace used by the composite kind
  bool pending_reset = true;
  LstdAccumulator acc;

  McarRunner(std::string lbl, Kind k, double c1_, double c2_, double lam, double clamp_)
      : label(std::move(lbl)),
        kind(k),
        c1(c1_),
        c2(c2_),
        lambda(lam),
        clamp(clamp_),
        e(TileCoding::kNumFeatures, 0.0),
        e2(TileCoding::kNumFeatures, 0.0),
        acc(TileCoding::kNumFeatures,
            clamp_ > 0 ? std::optional<double>(clamp_) : std::nullopt) {}
};

// Partition for the composite scheme: block 1 when position <= -0.9 or
// velocity >= 0.04, block 2 otherwise.
bool mcar_block_one(const McarState& s) { return s.position <= -0.9 || s.velocity >= 0.04; }

double scaling_lambda(double c, double beta, double gamma, double rho, double e_norm) {
  const double pre = gamma * rho * e_norm;
  return pre <= c ? beta : beta * c / pre;
}

void mcar_runner_step(McarRunner& r, const McarBehaviorEvent& ev,
                      const std::array<int, 2>& ones_prev, const std::array<int, 2>& ones_next) {
  if (r.pending_reset) {
    std::fill(r.e.begin(), r.e.end(), 0.0);
    std::fill(r.e2.begin(), r.e2.end(), 0.0);
    if (r.kind == McarRunner::Kind::kComposite) {
      Vector& owner = mcar_block_one(ev.state_before) ? r.e : r.e2;
      for (int i : ones_prev) owner[i] = 1.0;
    } else {
      for (int i : ones_prev) r.e[i] = 1.0;
    }
    r.pending_reset = false;
  }

  const std::vector<int> prev(ones_prev.begin(), ones_prev.end());
  const std::vector<int> next(ones_next.begin(), ones_next.end());
  if (r.kind == McarRunner::Kind::kComposite) {
    Vector summed = r.e;
    axpy(1.0, r.e2, summed);
    r.acc.accumulate_binary(summed, ev.rho, ev.reward, ev.discount, prev, next);
  } else {
    r.acc.accumulate_binary(r.e, ev.rho, ev.reward, ev.discount, prev, next);
  }

  const double g = ev.discount, rho = ev.rho;
  switch (r.kind) {
    case McarRunner::Kind::kScaling: {
      const double lam = scaling_lambda(r.c1, r.beta, g, rho, norm2(r.e));
      const double mult = lam * g * rho;
      for (double& x : r.e) x *= mult;
      break;
    }
    case McarRunner::Kind::kRetrace: {
      const double lam = rho == 0.0 ? 0.0 : r.beta * std::min(1.0, rho) / rho;
      const double mult = lam * g * rho;
      for (double& x : r.e) x *= mult;
      break;
    }
    case McarRunner::Kind::kConstant: {
      const double mult = r.lambda * g * rho;
      for (double& x : r.e) x *= mult;
      break;
    }
    case McarRunner::Kind::kComposite: {
      const double lam1 = scaling_lambda(r.c1, r.beta, g, rho, norm2(r.e));
      const double lam2 = scaling_lambda(r.c2, r.beta, g, rho, norm2(r.e2));
      for (double& x : r.e) x *= lam1 * g * rho;
      for (double& x : r.e2) x *= lam2 * g * rho;
      break;
    }
  }
  const bool block_one = mcar_block_one(ev.state_after);
  Vector& target =
      r.kind == McarRunner::Kind::kComposite ? (block_one ? r.e : r.e2) : r.e;
  for (int i : ones_next) target[i] += 1.0;
}

std::vector<McarRunner> mcar_suite_runners() {
  using K = McarRunner::Kind;
  std::vector<McarRunner> rs;
  rs.emplace_back("scaling_C0", K::kScaling, 0.0, 0.0, 0.0, 0.0);
  rs.emplace_back("scaling_C5", K::kScaling, 5.0, 0.0, 0.0, 0.0);
  rs.emplace_back("scaling_C25", K::kScaling, 25.0, 0.0, 0.0, 0.0);
  rs.emplace_back("scaling_C125", K::kScaling, 125.0, 0.0, 0.0, 0.0);
  rs.emplace_back("retrace", K::kRetrace, 0.0, 0.0, 0.0, 0.0);
  rs.emplace_back("composite_C125_25", K::kComposite, 125.0, 25.0, 0.0, 0.0);
  rs.emplace_back("lstd_l1", K::kConstant, 0.0, 0.0, 1.0, 0.0);
  rs.emplace_back("constrained_l1_B50", K::kConstant, 0.0, 0.0, 1.0, 50.0);
  return rs;
}

Vector load_or_compute_vector(const std::string& path, const std::string& col,
                              const std::function<Vector()>& compute) {
  if (fs::exists(path)) {
    const CsvTable t = read_csv(path);
    const int c = t.col(col);
    Vector v;
    v.reserve(t.rows.size());
    for (const auto& row : t.rows) v.push_back(std::stod(row[c]));
    if (static_cast<int>(v.size()) == McarGrid::size()) return v;
  }
  Vector v = compute();
  CsvWriter w(path, {"grid_index", col});
  for (int i = 0; i < static_cast<int>(v.size()); ++i) w.row(static_cast<long>(i), v[i]);
  return v;
}

RecipeStatus recipe_mcar_suite(const ExperimentConfig& cfg) {
  if (!cfg.slow)
    throw std::invalid_argument("mcar-suite takes minutes; pass --slow to confirm");

  std::ostringstream wname, vname;
  wname << "mcar_weights_" << cfg.mcar_weight_iters << "_" << cfg.seeds[0] << ".csv";
  vname << "mcar_vref_" << cfg.mcar_rollouts_per_point << "_" << cfg.seeds[0] << ".csv";
  const Vector weights = load_or_compute_vector(
      out_path(cfg, wname.str()), "weight",
      [&] { return mcar_visit_weights(cfg.mcar_weight_iters, cfg.seeds[0]); });
  const Vector v_ref = load_or_compute_vector(
      out_path(cfg, vname.str()), "value", [&] {
        return mcar_reference_values(cfg.mcar_rollouts_per_point, cfg.seeds[0], 20000,
                                     cfg.n_threads);
      });

  CsvWriter errors(out_path(cfg, "mcar_errors.csv"), {"scheme", "seed", "iter", "error"});
  std::vector<std::tuple<std::string, double, double>> finals;

  for (std::uint64_t seed : cfg.seeds) {
    std::vector<McarRunner> runners = mcar_suite_runners();
    McarBehaviorProcess proc(seed);
    long effective = 0;
    while (effective < cfg.mcar_effective_iters) {
      const McarBehaviorEvent ev = proc.step();
      if (!ev.effective) {
        for (McarRunner& r : runners) r.pending_reset = true;
        continue;
      }
      const auto ones_prev = TileCoding::active_features(ev.state_before);
      const auto ones_next = TileCoding::active_features(ev.state_after);
      for (McarRunner& r : runners) mcar_runner_step(r, ev, ones_prev, ones_next);
      if (ev.reached_goal)
        for (McarRunner& r : runners) r.pending_reset = true;
      ++effective;

      if (effective % cfg.checkpoint_every == 0 || effective == cfg.mcar_effective_iters) {
        for (McarRunner& r : runners) {
          double err = std::numeric_limits<double>::quiet_NaN();
          try {
            const LstdSolution sol = r.acc.solve();
            Vector v(McarGrid::size());
            for (int p = 0; p < McarGrid::size(); ++p) {
              const auto ones =
                  TileCoding::active_features(McarGrid::point(p / McarGrid::kNv, p % McarGrid::kNv));
              v[p] = sol.theta[ones[0]] + sol.theta[ones[1]];
            }
            err = mcar_weighted_error(v, v_ref, weights);
          } catch (const std::exception&) {
            // divergent accumulator: keep NaN
          }
          errors.row(r.label, seed, effective, err);
          if (effective == cfg.mcar_effective_iters) finals.emplace_back(r.label, 0.0, err);
        }
      }
    }
  }

  {
    CsvWriter w(out_path(cfg, "mcar_final_agg.csv"), {"scheme", "mean", "stddev", "n"});
    for (const AggregateRow& r : aggregate_mean_std(finals))
      w.row(r.series, r.mean, r.stddev, r.n);
  }
  return RecipeStatus::kOk;
}

}  // namespace

std::vector<std::string> recipe_names() {
  return {"trace-stats",    "ergodicity",     "toy-lstd-sweep", "toy-td-curve",
          "mcar-suite",     "counterexample", "theorem2-check"};
}

RecipeStatus run_recipe(const std::string& name, const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_out_dir(cfg);
  write_manifest(cfg.out_dir, name, cfg);
  RecipeStatus status;
  if (name == "trace-stats") status = recipe_trace_stats(cfg);
  else if (name == "ergodicity") status = recipe_ergodicity(cfg);
  else if (name == "toy-lstd-sweep") status = recipe_toy_lstd_sweep(cfg);
  else if (name == "toy-td-curve") status = recipe_toy_td_curve(cfg);
  else if (name == "counterexample") status = recipe_counterexample(cfg);
  else if (name == "theorem2-check") status = recipe_theorem2(cfg);
  else if (name == "mcar-suite") status = recipe_mcar_suite(cfg);
  else throw std::invalid_argument("unknown recipe: " + name);
  emit_plot_data(name, cfg.out_dir);
  return status;
}

void emit_plot_data(const std::string& recipe, const std::string& out_dir) {
  auto path = [&](const std::string& f) { return out_dir + "/" + f; };

  if (recipe == "toy-lstd-sweep") {
    const CsvTable t = read_csv(path("lstd_sweep.csv"));
    const int cs = t.col("series"), cp = t.col("param"), cd = t.col("distance"),
              ce = t.col("value_error");
    std::vector<std::tuple<std::string, double, double>> dist, err;
    for (const auto& row : t.rows) {
      dist.emplace_back(row[cs], std::stod(row[cp]), std::stod(row[cd]));
      err.emplace_back(row[cs], std::stod(row[cp]), std::stod(row[ce]));
    }
    CsvWriter w(path("plot_lstd_sweep.csv"),
                {"series", "metric", "x", "mean", "stddev", "n"});
    for (const AggregateRow& r : aggregate_mean_std(dist))
      w.row(r.series, std::string("distance"), r.x, r.mean, r.stddev, r.n);
    for (const AggregateRow& r : aggregate_mean_std(err))
      w.row(r.series, std::string("value_error"), r.x, r.mean, r.stddev, r.n);
    return;
  }

  if (recipe == "trace-stats" || recipe == "ergodicity") {
    // Per-series files are already tidy (x,y); consolidate into one file.
    CsvWriter w(path("plot_" + recipe + ".csv"), {"series", "x", "y"});
    for (const auto& entry : fs::directory_iterator(out_dir)) {
      const std::string fname = entry.path().filename().string();
      const bool trace_file = recipe == "trace-stats" && fname.rfind("trace_", 0) == 0;
      const bool ergo_file = recipe == "ergodicity" && fname.rfind("ergodicity_", 0) == 0 &&
                             fname.find("cross") == std::string::npos;
      if ((!trace_file && !ergo_file) || fname.rfind("plot_", 0) == 0) continue;
      const CsvTable t = read_csv(entry.path().string());
      if (t.header.size() != 2) continue;
      const std::string series = fname.substr(0, fname.size() - 4);
      for (const auto& row : t.rows) w.row(series, std::stod(row[0]), std::stod(row[1]));
    }
    return;
  }

  if (recipe == "mcar-suite") {
    const CsvTable t = read_csv(path("mcar_errors.csv"));
    const int cs = t.col("scheme"), cseed = t.col("seed"), ci = t.col("iter"),
              ce = t.col("error");
    CsvWriter w(path("plot_mcar_errors.csv"), {"series", "x", "y", "seed"});
    for (const auto& row : t.rows) w.row(row[cs], row[ci], row[ce], row[cseed]);
    return;
  }
  // counterexample, theorem2-check, toy-td-curve outputs are already tidy.
}

}  // namespace gbetd
