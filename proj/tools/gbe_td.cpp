// Batch experiment driver over the shared-library C API.
//
// gbe-td <recipe> [--config <file>] [--seed-offset k] [--slow] [--out dir]
// Exit codes: 0 success, 2 validation failure, 3 acceptance-check failure.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gbetd.h"

int main(int argc, char** argv) {
  CLI::App app{"Off-policy TD policy evaluation experiments"};
  app.footer(
      "Recipes: trace-stats, ergodicity, toy-lstd-sweep, toy-td-curve,\n"
      "         mcar-suite (--slow), counterexample, theorem2-check");

  std::string recipe;
  std::string config_path;
  std::string out_dir;
  long seed_offset = 0;
  bool slow = false;

  app.add_option("recipe", recipe, "Named experiment recipe")->required();
  app.add_option("--config", config_path, "Experiment config file");
  app.add_option("--out", out_dir, "Output directory (overrides config)");
  app.add_option("--seed-offset", seed_offset, "Added to every configured seed");
  app.add_flag("--slow", slow, "Allow minutes-scale recipes (mcar-suite)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const gbetd_status status =
      gbetd_run_recipe(recipe.c_str(), config_path.empty() ? nullptr : config_path.c_str(),
                       out_dir.empty() ? nullptr : out_dir.c_str(), seed_offset, slow ? 1 : 0);
  if (status == GBETD_OK) return 0;

  std::fprintf(stderr, "gbe-td: %s: %s\n", gbetd_status_name(status), gbetd_last_error());
  if (status == GBETD_ERR_CHECK_FAILED) return 3;
  return 2;
}
