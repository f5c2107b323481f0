#include "voql/voql.h"

#include <cstring>
#include <optional>
#include <string>

#include "voql/harness.hpp"
#include "voql/serialization.hpp"

struct voql_env {
  voql::EpisodicMdp mdp;
};

struct voql_experiment {
  voql::ExperimentConfig config;
  std::optional<voql::ExperimentResult> result;
};

namespace {

thread_local std::string g_last_error;

voql_status to_status(voql::ErrorCode code) {
  switch (code) {
    case voql::ErrorCode::kInvalidArgument:
      return VOQL_ERR_INVALID_ARGUMENT;
    case voql::ErrorCode::kIo:
      return VOQL_ERR_IO;
    case voql::ErrorCode::kParse:
      return VOQL_ERR_PARSE;
    case voql::ErrorCode::kInvariantBreach:
      return VOQL_ERR_INVARIANT;
    case voql::ErrorCode::kInternal:
      break;
  }
  return VOQL_ERR_INTERNAL;
}

// Runs `body`, converting exceptions into status codes and the thread's last error.
template <typename F>
voql_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return VOQL_OK;
  } catch (const voql::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VOQL_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return VOQL_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) voql::fail(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_overrides(const char* overrides_json) {
  if (overrides_json == nullptr || *overrides_json == '\0') return nlohmann::json::object();
  nlohmann::json o = voql::parse_json_text(overrides_json, "overrides");
  if (!o.is_object()) voql::fail("overrides must be a JSON object");
  return o;
}

}  // namespace

extern "C" {

const char* voql_version(void) { return "1.0.0"; }

const char* voql_last_error(void) { return g_last_error.c_str(); }

void voql_string_free(char* s) { delete[] s; }

voql_status voql_env_generate_linear(int d, int horizon, int num_states, int num_actions,
                                     uint64_t seed, voql_env** out) {
  return guarded([&] {
    need(out, "out");
    *out = new voql_env{voql::gen_linear_mdp(d, horizon, num_states, num_actions, seed)};
  });
}

voql_status voql_env_generate_tabular(int horizon, int num_states, int num_actions, uint64_t seed,
                                      double grid, voql_env** out) {
  return guarded([&] {
    need(out, "out");
    voql::TabularOptions opt;
    opt.horizon = horizon;
    opt.num_states = num_states;
    opt.num_actions = num_actions;
    opt.seed = seed;
    opt.grid = grid > 0.0 ? grid : 0.0;
    *out = new voql_env{voql::gen_tabular_mdp(opt)};
  });
}

voql_status voql_env_load(const char* path, voql_env** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new voql_env{voql::load_instance(path)};
  });
}

voql_status voql_env_save(const voql_env* env, const char* path) {
  return guarded([&] {
    need(env, "env");
    need(path, "path");
    voql::save_instance(env->mdp, path);
  });
}

voql_status voql_env_to_json(const voql_env* env, char** json_out) {
  return guarded([&] {
    need(env, "env");
    need(json_out, "json_out");
    *json_out = dup_string(voql::instance_to_json(env->mdp).dump());
  });
}

voql_status voql_env_dims(const voql_env* env, int* horizon, int* num_states, int* num_actions,
                          int* d) {
  return guarded([&] {
    need(env, "env");
    if (horizon) *horizon = env->mdp.horizon();
    if (num_states) *num_states = env->mdp.num_states();
    if (num_actions) *num_actions = env->mdp.num_actions();
    if (d) *d = env->mdp.has_features() ? env->mdp.linear().dim : 0;
  });
}

voql_status voql_env_optimal_value(const voql_env* env, double* value) {
  return guarded([&] {
    need(env, "env");
    need(value, "value");
    *value = voql::solve_optimal(env->mdp).initial_value;
  });
}

void voql_env_free(voql_env* env) { delete env; }

voql_status voql_experiment_from_file(const char* config_path, const char* overrides_json,
                                      voql_experiment** out) {
  return guarded([&] {
    need(config_path, "config_path");
    need(out, "out");
    *out = new voql_experiment{voql::load_config(config_path, parse_overrides(overrides_json)),
                               std::nullopt};
  });
}

voql_status voql_experiment_from_json(const char* config_json, const char* overrides_json,
                                      voql_experiment** out) {
  return guarded([&] {
    need(config_json, "config_json");
    need(out, "out");
    *out = new voql_experiment{
        voql::parse_config(config_json, "config", parse_overrides(overrides_json)), std::nullopt};
  });
}

voql_status voql_experiment_config(const voql_experiment* exp, char** json_out) {
  return guarded([&] {
    need(exp, "exp");
    need(json_out, "json_out");
    *json_out = dup_string(voql::config_to_json(exp->config).dump(2));
  });
}

voql_status voql_experiment_run(voql_experiment* exp, int* breach) {
  return guarded([&] {
    need(exp, "exp");
    exp->result = voql::run_experiment(exp->config);
    if (breach) *breach = exp->result->breach ? 1 : 0;
  });
}

voql_status voql_experiment_summary(const voql_experiment* exp, char** json_out) {
  return guarded([&] {
    need(exp, "exp");
    need(json_out, "json_out");
    if (!exp->result) voql::fail("the experiment has not been run");
    *json_out = dup_string(exp->result->summary.dump(2));
  });
}

voql_status voql_experiment_csv(const voql_experiment* exp, uint64_t seed, char** csv_out) {
  return guarded([&] {
    need(exp, "exp");
    need(csv_out, "csv_out");
    if (!exp->result) voql::fail("the experiment has not been run");
    for (const auto& sr : exp->result->seeds) {
      if (sr.seed == seed) {
        *csv_out = dup_string(voql::regret_csv(sr.records));
        return;
      }
    }
    voql::fail("seed " + std::to_string(seed) + " is not part of the run");
  });
}

void voql_experiment_free(voql_experiment* exp) { delete exp; }

voql_status voql_verify_run(const char* run_dir, char** report_json, int* breach) {
  return guarded([&] {
    need(run_dir, "run_dir");
    const auto res = voql::verify_run_directory(run_dir);
    if (report_json) *report_json = dup_string(res.report.dump(2));
    if (breach) *breach = res.breach ? 1 : 0;
  });
}

}  // extern "C"
