#include "gbetd.h"

#include <cstring>
#include <stdexcept>
#include <string>

#include "gbetd/environments.hpp"
#include "gbetd/experiment.hpp"
#include "gbetd/lambda_scheme.hpp"
#include "gbetd/lstd.hpp"
#include "gbetd/mdp.hpp"
#include "gbetd/trace.hpp"

struct gbetd_mdp {
  gbetd::TabularMdp mdp;
  gbetd::FeatureMap features;
};

struct gbetd_scheme {
  gbetd::SchemePtr scheme;
};

namespace {

thread_local std::string g_last_error;

gbetd_status fail(gbetd_status code, const char* what) {
  g_last_error = what ? what : "";
  return code;
}

template <typename Fn>
gbetd_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    return fail(GBETD_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::domain_error& e) {
    return fail(GBETD_ERR_CONDITION_FAILED, e.what());
  } catch (const std::runtime_error& e) {
    return fail(GBETD_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(GBETD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GBETD_ERR_INTERNAL, "unknown error");
  }
}

}  // namespace

extern "C" {

const char* gbetd_status_name(gbetd_status status) {
  switch (status) {
    case GBETD_OK: return "ok";
    case GBETD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case GBETD_ERR_IO: return "i/o error";
    case GBETD_ERR_CONDITION_FAILED: return "condition failed";
    case GBETD_ERR_CHECK_FAILED: return "check failed";
    case GBETD_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* gbetd_last_error(void) { return g_last_error.c_str(); }

gbetd_status gbetd_mdp_builtin(const char* name, gbetd_mdp** out) {
  return guarded([&]() -> gbetd_status {
    if (!name || !out) return fail(GBETD_ERR_INVALID_ARGUMENT, "null argument");
    gbetd::MdpFile file;
    if (std::strcmp(name, "toy") == 0) file = gbetd::build_toy();
    else if (std::strcmp(name, "two_state") == 0) file = gbetd::build_two_state();
    else return fail(GBETD_ERR_INVALID_ARGUMENT, "unknown builtin mdp");
    *out = new gbetd_mdp{std::move(file.mdp), std::move(file.features)};
    return GBETD_OK;
  });
}

gbetd_status gbetd_mdp_load(const char* path, gbetd_mdp** out) {
  return guarded([&]() -> gbetd_status {
    if (!path || !out) return fail(GBETD_ERR_INVALID_ARGUMENT, "null argument");
    gbetd::MdpFile file = gbetd::load_mdp_file(path);
    *out = new gbetd_mdp{std::move(file.mdp), std::move(file.features)};
    return GBETD_OK;
  });
}

void gbetd_mdp_free(gbetd_mdp* mdp) { delete mdp; }

int gbetd_mdp_num_states(const gbetd_mdp* mdp) { return mdp ? mdp->mdp.n_states : 0; }
int gbetd_mdp_num_features(const gbetd_mdp* mdp) {
  return mdp ? mdp->features.n_features : 0;
}

gbetd_status gbetd_mdp_validate(const gbetd_mdp* mdp, int checks[4]) {
  return guarded([&]() -> gbetd_status {
    if (!mdp) return fail(GBETD_ERR_INVALID_ARGUMENT, "null mdp");
    const gbetd::ValidationReport rep = gbetd::validate(mdp->mdp);
    if (checks) {
      checks[0] = rep.rows_stochastic;
      checks[1] = rep.absolutely_continuous;
      checks[2] = rep.discounted_spectral_ok;
      checks[3] = rep.behavior_irreducible;
    }
    if (!rep.all_ok()) return fail(GBETD_ERR_CONDITION_FAILED, rep.detail.c_str());
    return GBETD_OK;
  });
}

gbetd_status gbetd_mdp_value_function(const gbetd_mdp* mdp, double* out) {
  return guarded([&]() -> gbetd_status {
    if (!mdp || !out) return fail(GBETD_ERR_INVALID_ARGUMENT, "null argument");
    const gbetd::Vector v = gbetd::value_function(mdp->mdp);
    std::memcpy(out, v.data(), v.size() * sizeof(double));
    return GBETD_OK;
  });
}

gbetd_status gbetd_mdp_stationary_dist(const gbetd_mdp* mdp, double* out) {
  return guarded([&]() -> gbetd_status {
    if (!mdp || !out) return fail(GBETD_ERR_INVALID_ARGUMENT, "null argument");
    const gbetd::Vector z = gbetd::behavior_stationary_dist(mdp->mdp);
    std::memcpy(out, z.data(), z.size() * sizeof(double));
    return GBETD_OK;
  });
}

gbetd_status gbetd_scheme_constant(double lambda, gbetd_scheme** out) {
  return guarded([&]() -> gbetd_status {
    if (!out) return fail(GBETD_ERR_INVALID_ARGUMENT, "null output");
    *out = new gbetd_scheme{gbetd::make_constant_lambda(lambda)};
    return GBETD_OK;
  });
}

gbetd_status gbetd_scheme_scaling(const gbetd_mdp* mdp, double c, double beta,
                                  gbetd_scheme** out) {
  return guarded([&]() -> gbetd_status {
    if (!mdp || !out) return fail(GBETD_ERR_INVALID_ARGUMENT, "null argument");
    *out = new gbetd_scheme{gbetd::make_scaling_scheme(mdp->mdp.n_states, c, beta)};
    return GBETD_OK;
  });
}

gbetd_status gbetd_scheme_retrace(const gbetd_mdp* mdp, double beta, gbetd_scheme** out) {
  return guarded([&]() -> gbetd_status {
    if (!mdp || !out) return fail(GBETD_ERR_INVALID_ARGUMENT, "null argument");
    *out = new gbetd_scheme{gbetd::make_retrace_scheme(mdp->mdp.n_states, beta)};
    return GBETD_OK;
  });
}

gbetd_status gbetd_scheme_truncated_retrace(const gbetd_mdp* mdp, double k, double c,
                                            double beta, gbetd_scheme** out) {
  return guarded([&]() -> gbetd_status {
    if (!mdp || !out) return fail(GBETD_ERR_INVALID_ARGUMENT, "null argument");
    *out = new gbetd_scheme{
        gbetd::make_truncated_retrace_scheme(mdp->mdp.n_states, k, c, beta)};
    return GBETD_OK;
  });
}

void gbetd_scheme_free(gbetd_scheme* scheme) { delete scheme; }

gbetd_status gbetd_lstd_run(const gbetd_mdp* mdp, const gbetd_scheme* scheme, long steps,
                            uint64_t seed, double trace_clamp, double* theta_out,
                            double* max_trace_norm_out) {
  return guarded([&]() -> gbetd_status {
    if (!mdp || !scheme || !theta_out)
      return fail(GBETD_ERR_INVALID_ARGUMENT, "null argument");
    if (steps < 1) return fail(GBETD_ERR_INVALID_ARGUMENT, "steps must be positive");
    std::optional<double> clamp;
    if (trace_clamp > 0.0) clamp = trace_clamp;
    gbetd::LstdAccumulator acc(mdp->features.n_features, clamp);
    gbetd::TraceRunConfig rc;
    rc.seed = seed;
    gbetd::TraceProcess proc(mdp->mdp, mdp->features, scheme->scheme, rc);
    double max_norm = 0.0;
    for (long t = 0; t < steps; ++t) {
      const gbetd::TransitionRecord rec = proc.step();
      acc.accumulate(rec, mdp->features);
      max_norm = std::max(max_norm, gbetd::norm2(rec.trace));
    }
    const gbetd::LstdSolution sol = acc.solve();
    std::memcpy(theta_out, sol.theta.data(), sol.theta.size() * sizeof(double));
    if (max_trace_norm_out) *max_trace_norm_out = max_norm;
    return GBETD_OK;
  });
}

gbetd_status gbetd_run_recipe(const char* recipe, const char* config_path, const char* out_dir,
                              long seed_offset, int slow) {
  return guarded([&]() -> gbetd_status {
    if (!recipe) return fail(GBETD_ERR_INVALID_ARGUMENT, "null recipe");
    gbetd::ExperimentConfig cfg;
    if (config_path) cfg = gbetd::parse_config_file(config_path);
    if (out_dir) cfg.out_dir = out_dir;
    if (slow) cfg.slow = true;
    for (auto& s : cfg.seeds) s += static_cast<uint64_t>(seed_offset);
    const gbetd::RecipeStatus st = gbetd::run_recipe(recipe, cfg);
    if (st == gbetd::RecipeStatus::kCheckFailed)
      return fail(GBETD_ERR_CHECK_FAILED, "recipe acceptance check failed");
    return GBETD_OK;
  });
}

}  // extern "C"
