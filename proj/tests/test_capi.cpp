#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "voql/voql.h"

namespace fs = std::filesystem;

namespace {

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  voql_string_free(s);
  return out;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("voql_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kConfig = R"({
  "env": {"kind": "tabular", "H": 2, "nx": 2, "na": 2, "seed": 4, "grid": 0.5,
          "reward_model": "bernoulli"},
  "classes": {"kind": "grid", "grid_step": 0.5},
  "oracle": "vs",
  "episodes": 20,
  "seeds": [1, 2],
  "check_invariants": true
})";

}  // namespace

TEST_CASE("version string is present") {
  REQUIRE(voql_version() != nullptr);
  CHECK(std::string(voql_version()).size() > 0);
}

TEST_CASE("instances round trip through the C interface") {
  voql_env* env = nullptr;
  REQUIRE(voql_env_generate_linear(2, 3, 4, 2, 7, &env) == VOQL_OK);
  int H = 0, nx = 0, na = 0, d = -1;
  REQUIRE(voql_env_dims(env, &H, &nx, &na, &d) == VOQL_OK);
  CHECK(H == 3);
  CHECK(nx == 4);
  CHECK(na == 2);
  CHECK(d == 2);
  CHECK(voql_env_dims(env, nullptr, nullptr, nullptr, nullptr) == VOQL_OK);
  double v = -1.0;
  REQUIRE(voql_env_optimal_value(env, &v) == VOQL_OK);
  CHECK(v >= 0.0);
  CHECK(v <= 1.0 + 1e-9);

  char* text = nullptr;
  REQUIRE(voql_env_to_json(env, &text) == VOQL_OK);
  const auto doc = nlohmann::json::parse(take(text));
  CHECK(doc["horizon"] == 3);
  CHECK(doc["feature_dim"] == 2);

  const fs::path path = scratch_dir("env") / "instance.json";
  REQUIRE(voql_env_save(env, path.c_str()) == VOQL_OK);
  voql_env* loaded = nullptr;
  REQUIRE(voql_env_load(path.c_str(), &loaded) == VOQL_OK);
  double v2 = -1.0;
  REQUIRE(voql_env_optimal_value(loaded, &v2) == VOQL_OK);
  CHECK(v2 == v);
  voql_env_free(loaded);
  voql_env_free(env);

  REQUIRE(voql_env_generate_tabular(2, 3, 2, 5, 0.25, &env) == VOQL_OK);
  REQUIRE(voql_env_dims(env, &H, &nx, &na, &d) == VOQL_OK);
  CHECK(d == 0);
  voql_env_free(env);
}

TEST_CASE("errors map to status codes and the last-error message") {
  voql_env* env = nullptr;
  CHECK(voql_env_generate_linear(0, 3, 4, 2, 1, &env) == VOQL_ERR_INVALID_ARGUMENT);
  CHECK(env == nullptr);
  CHECK(std::string(voql_last_error()).size() > 0);
  CHECK(voql_env_generate_linear(2, 3, 4, 2, 1, nullptr) == VOQL_ERR_INVALID_ARGUMENT);
  CHECK(std::string(voql_last_error()).find("out") != std::string::npos);
  CHECK(voql_env_load("/nonexistent/voql/instance.json", &env) == VOQL_ERR_IO);

  voql_experiment* exp = nullptr;
  CHECK(voql_experiment_from_json("{\"episodes\": ", nullptr, &exp) == VOQL_ERR_PARSE);
  CHECK(voql_experiment_from_json(R"({"bogus": 1})", nullptr, &exp) != VOQL_OK);
  CHECK(std::string(voql_last_error()).find("bogus") != std::string::npos);

  // A successful call clears the message.
  REQUIRE(voql_env_generate_linear(2, 2, 2, 2, 1, &env) == VOQL_OK);
  CHECK(std::string(voql_last_error()).empty());
  voql_env_free(env);

  // Freeing NULL handles is a no-op.
  voql_env_free(nullptr);
  voql_experiment_free(nullptr);
  voql_string_free(nullptr);
}

TEST_CASE("experiments run through the C interface") {
  const fs::path out = scratch_dir("run");
  const std::string overrides = nlohmann::json{{"out", out.string()}}.dump();
  voql_experiment* exp = nullptr;
  REQUIRE(voql_experiment_from_json(kConfig, overrides.c_str(), &exp) == VOQL_OK);

  char* text = nullptr;
  CHECK(voql_experiment_summary(exp, &text) != VOQL_OK);
  REQUIRE(voql_experiment_config(exp, &text) == VOQL_OK);
  const auto cfg = nlohmann::json::parse(take(text));
  CHECK(cfg["episodes"] == 20);

  int breach = -1;
  REQUIRE(voql_experiment_run(exp, &breach) == VOQL_OK);
  CHECK(breach == 0);
  REQUIRE(voql_experiment_summary(exp, &text) == VOQL_OK);
  const auto summary = nlohmann::json::parse(take(text));
  CHECK(summary["per_seed"].size() == 2);

  REQUIRE(voql_experiment_csv(exp, 2, &text) == VOQL_OK);
  const std::string csv = take(text);
  CHECK(csv.rfind("episode,return,v1_exact,inst_regret,cum_regret,h_t,mean_sigma_bar,violations",
                  0) == 0);
  CHECK(voql_experiment_csv(exp, 99, &text) == VOQL_ERR_INVALID_ARGUMENT);
  CHECK(fs::exists(out / "regret_1.csv"));
  CHECK(fs::exists(out / "regret_2.csv"));
  voql_experiment_free(exp);

  int vbreach = -1;
  REQUIRE(voql_verify_run(out.c_str(), &text, &vbreach) == VOQL_OK);
  const auto report = nlohmann::json::parse(take(text));
  CHECK(report.is_object());
  CHECK(vbreach == 0);
  CHECK(voql_verify_run("/nonexistent/voql/run", &text, &vbreach) != VOQL_OK);
}

TEST_CASE("a zero-scaled run reports a breach") {
  const std::string overrides =
      nlohmann::json{{"params", {{"c_scale", 0.0}}}, {"episodes", 50}}.dump();
  voql_experiment* exp = nullptr;
  REQUIRE(voql_experiment_from_json(kConfig, overrides.c_str(), &exp) == VOQL_OK);
  int breach = 0;
  REQUIRE(voql_experiment_run(exp, &breach) == VOQL_OK);
  CHECK(breach == 1);
  voql_experiment_free(exp);
}
