#pragma once

// Experiment configuration, seeded batch runner and result emission.
//
// Config JSON (every key optional unless noted; unknown keys are rejected):
// {
//   "env": {"kind": "linear" | "tabular" | "file", "d": 3, "H": 4, "nx": 6, "na": 3,
//           "seed": 7, "path": "instance.json", "grid": 0, "reward_every_level": false,
//           "reward_model": "deterministic" | "bernoulli", "embed_linear": false},
//   "classes": {"kind": "auto" | "linear" | "grid", "grid_step": 0.5, "eps_c": auto,
//               "L": 2, "materialize_limit": 100000},
//   "algo": "voql" | "lsvi-ucb" | "uniform-random",
//   "oracle": "elliptical" | "vs" | "subsample",
//   "episodes": T, "seed": N | "seeds": [N, ...],
//   "params": {"c_scale": 0.05, "C_u": auto, "u_init": 2, "C_sens": 1, "delta": auto,
//              "alpha": auto, "lambda": 1, "eps": auto, "eps_b": auto},
//   "options": {"dsq_form": "surrogate" | "exact", "second_target": "optimistic" |
//               "over-optimistic", "envelope": true, "audit_z_points": 64,
//               "audit_s_samples": 4},
//   "check_invariants": false, "strict": false, "out": "", "workers": 0
// }
// A relative env path is resolved against the directory of the config file.
//
// Artifacts written to `out`:
//   regret_<seed>.csv   episode,return,v1_exact,inst_regret,cum_regret,h_t,
//                       mean_sigma_bar,violations
//   summary.json        see summary_to_json
//   instance.json       the instance plus a "function_classes" descriptor
//   config.json         the fully resolved configuration
//   runlog_<seed>.json  per-episode tables (only with check_invariants)
//   verify_report.json  audit reports (only with check_invariants)

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "voql/env.hpp"
#include "voql/function_class.hpp"
#include "voql/learner.hpp"
#include "voql/params.hpp"
#include "voql/verify.hpp"

namespace voql {

struct EnvSpec {
  std::string kind = "linear";
  int d = 3;
  int H = 4;
  int nx = 6;
  int na = 3;
  std::uint64_t seed = 7;
  std::string path;
  double grid = 0.0;
  bool reward_every_level = false;
  std::string reward_model = "deterministic";
  bool embed_linear = false;
};

struct ClassSpec {
  std::string kind = "auto";
  double grid_step = 0.5;
  double eps_c = -1.0;  // negative: sqrt(lambda / (8 T))
  double L = 2.0;
  std::int64_t materialize_limit = 100000;
};

struct ExperimentConfig {
  EnvSpec env;
  ClassSpec classes;
  std::string algo = "voql";
  std::string oracle = "elliptical";
  int episodes = 100;
  std::vector<std::uint64_t> seeds = {1};
  double c_scale = 0.05;
  double C_u = -1.0;
  double u_init = 2.0;
  double C_sens = 1.0;
  double delta = -1.0;
  double alpha = -1.0;
  double lambda = 1.0;
  double eps = -1.0;    // negative: eps_c for linear classes, 0 for grids
  double eps_b = -1.0;  // negative: eps_c for the elliptical oracle, else 0
  std::string dsq_form = "surrogate";
  std::string second_target = "optimistic";
  bool envelope = true;
  int audit_z_points = 64;
  int audit_s_samples = 4;
  bool check_invariants = false;
  bool strict = false;
  std::string out;
  int workers = 0;  // 0: one per hardware thread, capped by the seed count
};

// Builds a config from JSON text, then applies `overrides` (flags win). Errors
// carry "<source>:<line>:" prefixes pointing at the offending key when it came
// from the text.
ExperimentConfig parse_config(const std::string& text, const std::string& source,
                              const nlohmann::json& overrides = nlohmann::json::object());
ExperimentConfig load_config(const std::string& path,
                             const nlohmann::json& overrides = nlohmann::json::object());
nlohmann::json config_to_json(const ExperimentConfig& config);

EpisodicMdp build_instance(const ExperimentConfig& config);

struct ClassBundle {
  std::vector<FunctionClass> value;
  std::vector<FunctionClass> second;
  std::string kind;  // "linear" or "grid"
  double eps_c = 0.0;
  nlohmann::json descriptor() const;
};

ClassBundle build_classes(const EpisodicMdp& mdp, const ExperimentConfig& config);
VoqlParams build_params(const EpisodicMdp& mdp, const ClassBundle& classes,
                        const ExperimentConfig& config);
VoqlOptions build_options(const ExperimentConfig& config);

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<RegretRecord> records;
  int switched_episodes = 0;
  int raw_consistency_violations = 0;
  long long online_violations = 0;
  int max_distinct_subsample = -1;
  std::vector<EpisodeLog> logs;  // only with check_invariants under voql
  std::optional<VerifySummary> verify;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<SeedResult> seeds;
  nlohmann::json params;  // resolved learner parameters, null for baselines
  nlohmann::json summary;
  bool breach = false;
};

// Validates, runs every seed on a bounded worker pool, and writes artifacts
// when config.out is non-empty.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Least-squares slope of log cum_regret against log t on 50 log-spaced
// episodes in [T/10, T]; nullopt when fewer than two positive points exist.
std::optional<double> power_law_exponent(const std::vector<double>& cum_regret);

nlohmann::json summary_to_json(const ExperimentResult& result);
std::string regret_csv(const std::vector<RegretRecord>& records);

// Re-runs the audits on the run logs stored in `dir`, writes
// verify_report.json there, and returns the combined report.
struct VerifyDirResult {
  nlohmann::json report;
  bool breach = false;
};
VerifyDirResult verify_run_directory(const std::string& dir);

}  // namespace voql
