#include <fstream>
#include <sstream>

#include "gbetd/experiment.hpp"
#include "gbetd/trace.hpp"

namespace gbetd {

std::string SchemeConfig::label() const {
  std::ostringstream os;
  auto num = [](double x) {
    std::ostringstream s;
    s << x;
    return s.str();
  };
  if (type == "constant") {
    os << "constant_l" << num(lambda);
  } else if (type == "scaling") {
    os << "scaling_C" << num(c);
    if (beta != 1.0) os << "_b" << num(beta);
  } else if (type == "retrace") {
    os << "retrace_b" << num(beta);
  } else if (type == "truncated_retrace") {
    os << "trretrace_K" << num(k) << "_C" << num(c) << "_b" << num(beta);
  } else if (type == "composite") {
    os << "composite";
    for (const SchemeConfig& b : blocks) os << "_" << b.label();
  } else {
    os << type;
  }
  return os.str();
}

SchemePtr build_scheme(const SchemeConfig& cfg, int n_states) {
  if (cfg.type == "constant") return make_constant_lambda(cfg.lambda);
  if (cfg.type == "scaling") return make_scaling_scheme(n_states, cfg.c, cfg.beta);
  if (cfg.type == "retrace") return make_retrace_scheme(n_states, cfg.beta);
  if (cfg.type == "truncated_retrace")
    return make_truncated_retrace_scheme(n_states, cfg.k, cfg.c, cfg.beta);
  if (cfg.type == "composite")
    throw std::invalid_argument(
        "composite schemes carry several traces; use the composite runner");
  throw std::invalid_argument("unknown scheme type: " + cfg.type);
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("config: seeds list must not be empty");
  if (run_length < 0 || checkpoint_every <= 0 || trace_steps <= 0)
    throw std::invalid_argument("config: nonpositive run length");
  if (environment != "toy" && environment != "two_state" && environment != "mcar" &&
      environment.rfind("file:", 0) != 0)
    throw std::invalid_argument("config: unknown environment " + environment);
  for (const SchemeConfig& s : schemes) {
    if (s.type == "composite") {
      if (s.blocks.empty()) throw std::invalid_argument("config: composite without blocks");
      if (s.partition.empty())
        throw std::invalid_argument("config: composite without a partition vector");
      for (int b : s.partition)
        if (b < 0 || b >= static_cast<int>(s.blocks.size()))
          throw std::invalid_argument("config: partition references a missing block");
    }
  }
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) {
    if (tok[0] == '#') break;
    out.push_back(tok);
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  cfg.seeds.clear();
  cfg.schemes.clear();

  enum class Section { kNone, kExperiment, kScheme, kBlock };
  Section section = Section::kNone;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks[0] == "[experiment]") {
      section = Section::kExperiment;
      continue;
    }
    if (toks[0] == "[scheme]") {
      section = Section::kScheme;
      cfg.schemes.emplace_back();
      continue;
    }
    if (toks[0] == "[scheme.block]") {
      if (cfg.schemes.empty()) fail("[scheme.block] outside a [scheme] section");
      section = Section::kBlock;
      cfg.schemes.back().blocks.emplace_back();
      continue;
    }
    if (toks[0][0] == '[') fail("unknown section " + toks[0]);
    if (section == Section::kNone) fail("key before any section");
    if (toks.size() < 2) fail("key without value: " + toks[0]);

    const std::string& key = toks[0];
    auto as_double = [&](const std::string& s) {
      try {
        return std::stod(s);
      } catch (...) {
        fail("bad number " + s);
        return 0.0;
      }
    };
    auto as_long = [&](const std::string& s) { return static_cast<long>(as_double(s)); };

    if (section == Section::kExperiment) {
      if (key == "environment") cfg.environment = toks[1];
      else if (key == "run_length") cfg.run_length = as_long(toks[1]);
      else if (key == "checkpoint_every") cfg.checkpoint_every = as_long(toks[1]);
      else if (key == "out_dir") cfg.out_dir = toks[1];
      else if (key == "slow") cfg.slow = as_long(toks[1]) != 0;
      else if (key == "threads") cfg.n_threads = static_cast<int>(as_long(toks[1]));
      else if (key == "trace_steps") cfg.trace_steps = as_long(toks[1]);
      else if (key == "trace_ball_radius") cfg.trace_ball_radius = as_double(toks[1]);
      else if (key == "excursion_bin_width") cfg.excursion_bin_width = as_double(toks[1]);
      else if (key == "norm_downsample") cfg.norm_downsample = as_long(toks[1]);
      else if (key == "record_log") cfg.record_log = as_long(toks[1]) != 0;
      else if (key == "reward_noise_std") cfg.reward_noise_std = as_double(toks[1]);
      else if (key == "mcar_effective_iters") cfg.mcar_effective_iters = as_long(toks[1]);
      else if (key == "mcar_weight_iters") cfg.mcar_weight_iters = as_long(toks[1]);
      else if (key == "mcar_rollouts_per_point")
        cfg.mcar_rollouts_per_point = static_cast<int>(as_long(toks[1]));
      else if (key == "seeds") {
        for (size_t i = 1; i < toks.size(); ++i)
          cfg.seeds.push_back(static_cast<std::uint64_t>(as_long(toks[i])));
      } else {
        fail("unknown experiment key " + key);
      }
    } else {
      SchemeConfig& sc = section == Section::kScheme ? cfg.schemes.back()
                                                     : cfg.schemes.back().blocks.back();
      if (key == "type") sc.type = toks[1];
      else if (key == "lambda") sc.lambda = as_double(toks[1]);
      else if (key == "c") sc.c = as_double(toks[1]);
      else if (key == "k") sc.k = as_double(toks[1]);
      else if (key == "beta") sc.beta = as_double(toks[1]);
      else if (key == "partition") {
        for (size_t i = 1; i < toks.size(); ++i)
          sc.partition.push_back(static_cast<int>(as_long(toks[i])));
      } else {
        fail("unknown scheme key " + key);
      }
    }
  }
  if (cfg.seeds.empty()) cfg.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse_config(in);
}

namespace {

void hash_mix(std::uint64_t& h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;  // FNV-1a
  }
  h ^= 0xff;
  h *= 0x100000001b3ULL;
}

void hash_mix(std::uint64_t& h, double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  hash_mix(h, os.str());
}

void hash_scheme(std::uint64_t& h, const SchemeConfig& s) {
  hash_mix(h, s.type);
  hash_mix(h, s.lambda);
  hash_mix(h, s.c);
  hash_mix(h, s.k);
  hash_mix(h, s.beta);
  for (int b : s.partition) hash_mix(h, static_cast<double>(b));
  for (const SchemeConfig& blk : s.blocks) hash_scheme(h, blk);
}

}  // namespace

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  hash_mix(h, cfg.environment);
  hash_mix(h, static_cast<double>(cfg.run_length));
  hash_mix(h, static_cast<double>(cfg.checkpoint_every));
  hash_mix(h, static_cast<double>(cfg.trace_steps));
  hash_mix(h, cfg.trace_ball_radius);
  hash_mix(h, cfg.excursion_bin_width);
  hash_mix(h, static_cast<double>(cfg.norm_downsample));
  hash_mix(h, cfg.record_log ? "log" : "nolog");
  hash_mix(h, cfg.reward_noise_std);
  hash_mix(h, static_cast<double>(cfg.mcar_effective_iters));
  hash_mix(h, static_cast<double>(cfg.mcar_weight_iters));
  hash_mix(h, static_cast<double>(cfg.mcar_rollouts_per_point));
  hash_mix(h, cfg.slow ? "slow" : "fast");
  for (std::uint64_t s : cfg.seeds) hash_mix(h, static_cast<double>(s));
  for (const SchemeConfig& s : cfg.schemes) hash_scheme(h, s);
  return h;
}

}  // namespace gbetd
