// Command-line front end over the C interface.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "voql/voql.h"

namespace {

int report_failure(voql_status status) {
  std::fprintf(stderr, "error: %s\n", voql_last_error());
  return status == VOQL_OK ? 0 : 1;
}

void print_owned(char* text) {
  std::printf("%s\n", text);
  voql_string_free(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance-weighted optimistic Q-learning experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  std::string config_path, algo, oracle, out_dir;
  std::uint64_t seed = 0;
  int episodes = 0, workers = 0;
  double scale = 0.0;
  bool check = false, strict = false;
  run->add_option("--config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  auto* o_seed = run->add_option("--seed", seed, "Run a single seed");
  auto* o_episodes = run->add_option("--episodes", episodes, "Number of episodes T");
  auto* o_algo = run->add_option("--algo", algo, "voql | lsvi-ucb | uniform-random");
  auto* o_oracle = run->add_option("--oracle", oracle, "vs | elliptical | subsample");
  auto* o_scale = run->add_option("--scale", scale, "Global multiplier c_scale on confidence constants");
  auto* o_check = run->add_flag("--check-invariants", check, "Record logs and audit invariants");
  auto* o_out = run->add_option("--out", out_dir, "Output directory");
  auto* o_strict = run->add_flag("--strict", strict, "Exit with code 2 on an audit-budget breach");
  auto* o_workers = run->add_option("--workers", workers, "Worker threads (0: automatic)");

  auto* gen = app.add_subcommand("gen-env", "Generate an instance JSON");
  std::string kind = "linear", gen_out;
  int d = 3, H = 4, nx = 6, na = 3;
  std::uint64_t gen_seed = 7;
  double grid = 0.0;
  gen->add_option("--kind", kind, "linear | tabular")->check(CLI::IsMember({"linear", "tabular"}));
  gen->add_option("--d", d, "Feature dimension (linear)");
  gen->add_option("--H", H, "Horizon");
  gen->add_option("--nx", nx, "Number of states");
  gen->add_option("--na", na, "Number of actions");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--grid", grid, "Probability grid for tabular instances (0: none)");
  gen->add_option("--out", gen_out, "Output path")->required();

  auto* ver = app.add_subcommand("verify", "Re-run the audits on the logs of a run directory");
  std::string run_dir;
  bool verify_strict = false;
  ver->add_option("--run", run_dir, "Run output directory")->required()->check(CLI::ExistingDirectory);
  ver->add_flag("--strict", verify_strict, "Exit with code 2 on an audit-budget breach");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    nlohmann::json overrides = nlohmann::json::object();
    if (o_seed->count()) overrides["seed"] = seed;
    if (o_episodes->count()) overrides["episodes"] = episodes;
    if (o_algo->count()) overrides["algo"] = algo;
    if (o_oracle->count()) overrides["oracle"] = oracle;
    if (o_scale->count()) overrides["params"]["c_scale"] = scale;
    if (o_check->count()) overrides["check_invariants"] = true;
    if (o_out->count()) overrides["out"] = out_dir;
    if (o_strict->count()) overrides["strict"] = true;
    if (o_workers->count()) overrides["workers"] = workers;
    voql_experiment* exp = nullptr;
    voql_status st = voql_experiment_from_file(config_path.c_str(), overrides.dump().c_str(), &exp);
    if (st != VOQL_OK) return report_failure(st);
    char* cfg = nullptr;
    st = voql_experiment_config(exp, &cfg);
    if (st != VOQL_OK) {
      voql_experiment_free(exp);
      return report_failure(st);
    }
    const bool strict_mode = nlohmann::json::parse(cfg).value("strict", false);
    voql_string_free(cfg);
    int breach = 0;
    st = voql_experiment_run(exp, &breach);
    if (st != VOQL_OK) {
      voql_experiment_free(exp);
      return report_failure(st);
    }
    char* summary = nullptr;
    st = voql_experiment_summary(exp, &summary);
    voql_experiment_free(exp);
    if (st != VOQL_OK) return report_failure(st);
    print_owned(summary);
    if (breach) std::fprintf(stderr, "invariant audit budget exceeded\n");
    return breach && strict_mode ? 2 : 0;
  }

  if (*gen) {
    voql_env* env = nullptr;
    voql_status st = kind == "linear"
                         ? voql_env_generate_linear(d, H, nx, na, gen_seed, &env)
                         : voql_env_generate_tabular(H, nx, na, gen_seed, grid, &env);
    if (st != VOQL_OK) return report_failure(st);
    st = voql_env_save(env, gen_out.c_str());
    double v = 0.0;
    if (st == VOQL_OK) st = voql_env_optimal_value(env, &v);
    voql_env_free(env);
    if (st != VOQL_OK) return report_failure(st);
    std::printf("wrote %s (optimal value %.6f)\n", gen_out.c_str(), v);
    return 0;
  }

  char* report = nullptr;
  int breach = 0;
  const voql_status st = voql_verify_run(run_dir.c_str(), &report, &breach);
  if (st != VOQL_OK) return report_failure(st);
  print_owned(report);
  if (breach) std::fprintf(stderr, "invariant audit budget exceeded\n");
  return breach && verify_strict ? 2 : 0;
}
