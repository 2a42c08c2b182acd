#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gbetd/environments.hpp"
#include "gbetd/experiment.hpp"

using namespace gbetd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("gbetd_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("config parsing: sections, schemes and composite blocks") {
  std::stringstream ss(R"(
# comment line
[experiment]
environment toy
run_length 12345
seeds 4 5 6
checkpoint_every 500
out_dir /tmp/somewhere

[scheme]
type scaling
c 25
beta 0.9

[scheme]
type composite
partition 0 0 0 0 0 0 0 0 0 0 0 1 1 1 1 1 1 1 1 1 1
[scheme.block]
type constant
lambda 1
[scheme.block]
type constant
lambda 0
)");
  const ExperimentConfig cfg = parse_config(ss);
  CHECK(cfg.environment == "toy");
  CHECK(cfg.run_length == 12345);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5, 6});
  REQUIRE(cfg.schemes.size() == 2);
  CHECK(cfg.schemes[0].type == "scaling");
  CHECK(cfg.schemes[0].c == 25.0);
  CHECK(cfg.schemes[0].beta == 0.9);
  CHECK(cfg.schemes[1].type == "composite");
  REQUIRE(cfg.schemes[1].blocks.size() == 2);
  CHECK(cfg.schemes[1].blocks[0].lambda == 1.0);
  CHECK(cfg.schemes[1].partition.size() == 21);
}

TEST_CASE("config validation failures") {
  ExperimentConfig cfg;
  cfg.seeds.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // empty seeds

  std::stringstream bad_env("[experiment]\nenvironment mars\n");
  CHECK_THROWS_AS(parse_config(bad_env), std::invalid_argument);

  std::stringstream bad_key("[experiment]\nfrobnicate 3\n");
  CHECK_THROWS_AS(parse_config(bad_key), std::invalid_argument);

  std::stringstream orphan_block("[scheme.block]\ntype constant\n");
  CHECK_THROWS_AS(parse_config(orphan_block), std::invalid_argument);

  std::stringstream no_partition(
      "[scheme]\ntype composite\n[scheme.block]\ntype constant\nlambda 1\n");
  CHECK_THROWS_AS(parse_config(no_partition), std::invalid_argument);
}

TEST_CASE("build_scheme rejects unknown types and composite") {
  SchemeConfig sc;
  sc.type = "mystery";
  CHECK_THROWS_AS(build_scheme(sc, 21), std::invalid_argument);
  sc.type = "composite";
  CHECK_THROWS_AS(build_scheme(sc, 21), std::invalid_argument);
  sc.type = "retrace";
  CHECK(build_scheme(sc, 21) != nullptr);
}

TEST_CASE("config hash tracks semantic fields only") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  CHECK(config_hash(a) == config_hash(b));

  b.out_dir = "elsewhere";  // presentation only
  CHECK(config_hash(a) == config_hash(b));

  b = a;
  b.run_length += 1;
  CHECK(config_hash(a) != config_hash(b));

  b = a;
  b.seeds.push_back(99);
  CHECK(config_hash(a) != config_hash(b));

  b = a;
  SchemeConfig sc;
  sc.type = "retrace";
  b.schemes.push_back(sc);
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("aggregate_mean_std against a hand-computed table") {
  // (series, x, y): two cells; hand numbers: mean of {1, 2, 4} = 7/3,
  // sample stddev = sqrt(((1-7/3)^2+(2-7/3)^2+(4-7/3)^2)/2) = sqrt(7/3).
  const std::vector<std::tuple<std::string, double, double>> pts = {
      {"a", 1.0, 1.0}, {"a", 1.0, 2.0}, {"a", 1.0, 4.0}, {"b", 2.0, 10.0}};
  const auto rows = aggregate_mean_std(pts);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].series == "a");
  CHECK(rows[0].mean == doctest::Approx(7.0 / 3.0));
  CHECK(rows[0].stddev == doctest::Approx(std::sqrt(7.0 / 3.0)));
  CHECK(rows[0].n == 3);
  CHECK(rows[1].series == "b");
  CHECK(rows[1].mean == 10.0);
  CHECK(rows[1].stddev == 0.0);
}

TEST_CASE("run_recipe rejects unknown recipes") {
  ExperimentConfig cfg;
  cfg.out_dir = temp_dir("unknown");
  CHECK_THROWS_AS(run_recipe("no-such-recipe", cfg), std::invalid_argument);
}

TEST_CASE("mcar-suite refuses to run without the slow flag") {
  ExperimentConfig cfg;
  cfg.out_dir = temp_dir("guard");
  CHECK_THROWS_AS(run_recipe("mcar-suite", cfg), std::invalid_argument);
}

TEST_CASE("counterexample recipe passes and writes its table") {
  ExperimentConfig cfg;
  cfg.out_dir = temp_dir("cex");
  CHECK(run_recipe("counterexample", cfg) == RecipeStatus::kOk);
  CHECK(fs::exists(cfg.out_dir + "/counterexample.csv"));
  CHECK(fs::exists(cfg.out_dir + "/manifest_counterexample.txt"));
}

TEST_CASE("toy-td-curve is deterministic byte-for-byte") {
  ExperimentConfig cfg;
  cfg.out_dir = temp_dir("curve1");
  CHECK(run_recipe("toy-td-curve", cfg) == RecipeStatus::kOk);
  const std::string first = slurp(cfg.out_dir + "/td_curve.csv");
  ExperimentConfig cfg2;
  cfg2.out_dir = temp_dir("curve2");
  CHECK(run_recipe("toy-td-curve", cfg2) == RecipeStatus::kOk);
  CHECK(first == slurp(cfg2.out_dir + "/td_curve.csv"));
  CHECK(first.find("lambda,distance,value_error") == 0);
}

TEST_CASE("trace-stats recipe with a small config emits plot data" *
          doctest::timeout(300)) {
  ExperimentConfig cfg;
  cfg.out_dir = temp_dir("ts");
  cfg.trace_steps = 20000;
  cfg.norm_downsample = 10;
  SchemeConfig sc;
  sc.type = "scaling";
  sc.c = 50;
  cfg.schemes = {sc};
  CHECK(run_recipe("trace-stats", cfg) == RecipeStatus::kOk);
  CHECK(fs::exists(cfg.out_dir + "/trace_norms_scaling_C50.csv"));
  CHECK(fs::exists(cfg.out_dir + "/trace_tail_scaling_C50.csv"));
  CHECK(fs::exists(cfg.out_dir + "/plot_trace-stats.csv"));

  // Re-running the identical config reproduces the files exactly.
  const std::string norms = slurp(cfg.out_dir + "/trace_norms_scaling_C50.csv");
  ExperimentConfig cfg2 = cfg;
  cfg2.out_dir = temp_dir("ts2");
  CHECK(run_recipe("trace-stats", cfg2) == RecipeStatus::kOk);
  CHECK(norms == slurp(cfg2.out_dir + "/trace_norms_scaling_C50.csv"));
}

TEST_CASE("run_tabular_lstd handles composite schemes") {
  const MdpFile toy = build_toy();
  SchemeConfig comp;
  comp.type = "composite";
  comp.partition.assign(21, 0);
  for (int s = 11; s < 21; ++s) comp.partition[s] = 1;
  SchemeConfig b1;
  b1.type = "constant";
  b1.lambda = 0.9;
  comp.blocks = {b1, b1};

  SchemeConfig single;
  single.type = "constant";
  single.lambda = 0.9;

  const TabularLstdRun a = run_tabular_lstd(toy.mdp, toy.features, comp, 20000, 3);
  const TabularLstdRun b = run_tabular_lstd(toy.mdp, toy.features, single, 20000, 3);
  // Identical blocks make the composite equivalent to the single scheme.
  CHECK(norm2(a.theta - b.theta) < 1e-9);
}
