#include "doctest.h"
#include "oracles.hpp"
#include "voql/bonus.hpp"
#include "voql/learner.hpp"
#include "voql/params.hpp"
#include "voql/verify.hpp"

using namespace voql;

namespace {

struct Run {
  EpisodicMdp mdp;
  std::vector<FunctionClass> classes;
  std::vector<EpisodeLog> logs;
  RunContext ctx;
  double delta = 0.0;
};

Run grid_run(const TabularOptions& env, int T, double c_scale, std::uint64_t seed) {
  Run run{gen_tabular_mdp(env), {}, {}, {}, 0.0};
  std::vector<FunctionClass> second;
  for (int h = 0; h < env.horizon; ++h) {
    run.classes.push_back(FunctionClass::grid(env.num_states, env.num_actions, 0.5, 2.0));
    second.push_back(FunctionClass::grid(env.num_states, env.num_actions, 0.5, 4.0));
  }
  ParamsConfig c;
  c.T = T;
  c.H = env.horizon;
  c.c_scale = c_scale;
  c.log_N = run.classes[0].log_size();
  c.log_Nb = log_bonus_class_vs(c.log_N);
  c.d_alpha = 2.0;
  const VoqlParams params(c);
  VoqlOptions opts;
  opts.oracle = OracleKind::kVersionSpace;
  opts.record_log = true;
  VoqlLearner learner(run.mdp, run.classes, second, params, opts, seed);
  learner.run(T);
  run.logs = learner.logs();
  run.ctx = RunContext{env.horizon, params.alpha(), params.lambda(), params.L(), params.eps()};
  run.delta = params.delta();
  return run;
}

TabularOptions bernoulli_env(std::uint64_t seed) {
  TabularOptions o;
  o.horizon = 2;
  o.num_states = 2;
  o.num_actions = 2;
  o.seed = seed;
  o.grid = 0.5;
  o.reward_model = RewardModel::kBernoulli;
  return o;
}

const ViolationReport& find(const VerifySummary& s, const std::string& name) {
  for (const auto& r : s.reports) {
    if (r.name == name) return r;
  }
  FAIL("missing report " << name);
  return s.reports.front();
}

}  // namespace

TEST_CASE("violation report bookkeeping") {
  ViolationReport r;
  r.name = "demo";
  CHECK(r.rate() == 0.0);
  CHECK(r.worst_slack == -kInf);
  CHECK(r.compare(0.5, 1.0, 0.0, {{"i", 0}}));
  CHECK(r.worst_slack == doctest::Approx(-0.5));
  CHECK_FALSE(r.compare(2.0, 1.0, 0.0, {{"i", 1}}));
  CHECK(r.compare(1.0 + 1e-10, 1.0, 1e-9, {{"i", 2}}));
  CHECK(r.total == 3);
  CHECK(r.violations == 1);
  CHECK(r.worst_slack == doctest::Approx(1.0));
  CHECK(r.samples.size() == 1);
  CHECK(r.rate() == doctest::Approx(1.0 / 3.0));
  const auto j = r.to_json();
  CHECK(j["check"] == "demo");
  CHECK(j["violations"] == 1);
}

TEST_CASE("version-space bonus audited against itself has no violations") {
  Rng rng(3);
  std::vector<std::vector<double>> tables(30, std::vector<double>(4));
  for (auto& t : tables) {
    for (double& v : t) v = rng.uniform();
  }
  const FunctionClass cls = FunctionClass::finite(4, 1, tables, 1.0);
  std::vector<double> weight(4, 0.0);
  FiniteUncertainty ctx(cls, 1.0);
  for (int s = 0; s < 10; ++s) {
    const PairIndex z = rng.uniform_int(4);
    const double sigma = 0.5 + rng.uniform();
    weight[z] += 1.0 / (sigma * sigma);
    ctx.append(z, sigma);
  }
  const auto c = cls.member(7);
  const std::vector<double> center(c.begin(), c.end());
  const BonusFn b = vs_bonus(cls, center, weight, 3.0);
  ViolationReport dom, cap;
  check_bonus_contract(dom, cap, b, cls, center, weight, 3.0, ctx, 1.0, 0.0, 1.0);
  CHECK(dom.total == 4);
  CHECK(dom.violations == 0);
  CHECK(cap.violations == 0);

  // A bonus shrunk below the sup is flagged.
  BonusFn half = b;
  for (auto& v : half.values.mutable_values()) v *= 0.5;
  ViolationReport dom2, cap2;
  check_bonus_contract(dom2, cap2, half, cls, center, weight, 3.0, ctx, 1.0, 0.0, 1.0);
  CHECK(dom2.violations > 0);
}

TEST_CASE("full-data subsample passes the sandwich and size checks") {
  const FunctionClass cls = FunctionClass::grid(2, 1, 0.5, 1.0);
  SubsampledSet set(2);
  std::vector<double> weight(2, 0.0);
  for (int s = 0; s < 5; ++s) {
    set.add(s % 2, 1.0, 1);
    weight[s % 2] += 1.0;
  }
  const std::vector<double> center = {0.5, 0.5};
  ViolationReport sandwich, size;
  check_subsample(sandwich, size, set, cls, center, weight, 0.2, 5);
  CHECK(sandwich.total == 4);
  CHECK(sandwich.violations == 0);
  CHECK(size.violations == 0);
  ViolationReport sandwich2, size2;
  check_subsample(sandwich2, size2, set, cls, center, weight, 0.2, 4);
  CHECK(size2.violations == 1);
}

TEST_CASE("consistency scan counts increases") {
  std::vector<QFunction> seq = {QFunction(1, 2, std::vector<double>{1.0, 1.0}),
                                QFunction(1, 2, std::vector<double>{0.9, 1.0}),
                                QFunction(1, 2, std::vector<double>{0.8, 1.2})};
  const ViolationReport r = check_consistency(seq);
  CHECK(r.total == 4);
  CHECK(r.violations == 1);
  CHECK(r.worst_slack == doctest::Approx(0.2));
}

TEST_CASE("theory-mode run passes every audit") {
  Run run = grid_run(bernoulli_env(4), 50, 1.0, 1);
  const VerifySummary s = verify_run(run.logs, run.mdp, run.classes, run.ctx,
                                     LinearDsqForm::kSurrogate, run.delta);
  CHECK_FALSE(s.breach);
  CHECK(find(s, "monotonicity").violations == 0);
  CHECK(find(s, "monotonicity").total > 0);
  CHECK(find(s, "variance_lower").violations == 0);
  CHECK(find(s, "variance_upper").violations == 0);
  CHECK(find(s, "sigma_bar_replay").violations == 0);
  CHECK(find(s, "sigma_bar_replay").total > 0);
  CHECK(find(s, "ranges").violations == 0);
  // Reports are pure functions of the logs.
  const VerifySummary again = verify_run(run.logs, run.mdp, run.classes, run.ctx,
                                         LinearDsqForm::kSurrogate, run.delta);
  CHECK(again.to_json() == s.to_json());
}

TEST_CASE("zeroed bonuses break monotonicity") {
  long long violations = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Run run = grid_run(bernoulli_env(4), 50, 0.0, seed);
    const OptimalSolution opt = solve_optimal(run.mdp);
    violations += check_monotonicity(run.logs, run.mdp, opt).violations;
  }
  CHECK(violations > 0);
}

TEST_CASE("deterministic dynamics satisfy the variance lower bound trivially") {
  // Two states that swap deterministically, with deterministic rewards.
  std::vector<MdpLevel> levels(3);
  for (auto& lvl : levels) {
    lvl.transitions = {0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0};
    lvl.rewards = {0.0, 0.25, 0.0, 0.0};
  }
  levels[2].rewards = {0.0, 0.5, 0.5, 0.0};
  const EpisodicMdp mdp(2, 2, levels, {1.0, 0.0});
  std::vector<FunctionClass> classes, second;
  for (int h = 0; h < 3; ++h) {
    classes.push_back(FunctionClass::grid(2, 2, 0.5, 2.0));
    second.push_back(FunctionClass::grid(2, 2, 1.0, 4.0));
  }
  ParamsConfig c;
  c.T = 30;
  c.H = 3;
  c.c_scale = 0.0;
  VoqlOptions opts;
  opts.oracle = OracleKind::kVersionSpace;
  opts.record_log = true;
  VoqlLearner learner(mdp, classes, second, VoqlParams(c), opts, 2);
  learner.run(30);
  const ViolationReport r = check_variance_lower(learner.logs(), mdp, solve_optimal(mdp));
  CHECK(r.total == 90);
  CHECK(r.violations == 0);
}

TEST_CASE("replay and range audits catch tampered logs") {
  Run run = grid_run(bernoulli_env(9), 20, 0.5, 3);
  std::vector<EpisodeLog> bad = run.logs;
  bad[10].visits[1].sigma_bar = std::nextafter(bad[10].visits[1].sigma_bar, 10.0);
  CHECK(check_sigma_bar_replay(bad, run.classes, run.ctx, LinearDsqForm::kSurrogate).violations ==
        1);
  bad = run.logs;
  bad[5].f1[0][0] = 1.5;
  bad[6].switch_level = 0;
  CHECK(check_ranges(bad, run.ctx).violations == 2);
  const VerifySummary s =
      verify_run(bad, run.mdp, run.classes, run.ctx, LinearDsqForm::kSurrogate, run.delta);
  CHECK(s.breach);
}

TEST_CASE("run logs survive a JSON round trip") {
  Run run = grid_run(bernoulli_env(4), 15, 1.0, 5);
  const nlohmann::json doc = episode_logs_to_json(run.logs);
  const std::vector<EpisodeLog> back =
      episode_logs_from_json(nlohmann::json::parse(doc.dump()), 2, 2);
  REQUIRE(back.size() == run.logs.size());
  CHECK(episode_logs_to_json(back) == doc);
  const auto a = verify_run(run.logs, run.mdp, run.classes, run.ctx, LinearDsqForm::kSurrogate,
                            run.delta);
  const auto b =
      verify_run(back, run.mdp, run.classes, run.ctx, LinearDsqForm::kSurrogate, run.delta);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("completeness audit measures the distance of backups to the class") {
  // One level, so the backup of any next-level table is the mean reward.
  std::vector<MdpLevel> levels(1);
  levels[0].transitions = {1.0, 0.0, 0.0, 1.0};
  levels[0].rewards = {0.25, 1.0};
  const EpisodicMdp mdp(2, 1, levels, {1.0, 0.0});
  std::vector<EpisodeLog> logs(3);
  for (int i = 0; i < 3; ++i) {
    logs[i].t = i + 1;
    logs[i].f1 = {QFunction(2, 1, std::vector<double>{1.0, 1.0})};
  }
  RunContext ctx{1, 0.1, 1.0, 2.0, 0.0};
  const std::vector<FunctionClass> exact = {
      FunctionClass::finite(2, 1, {{0.0, 0.0}, {0.25, 1.0}}, 2.0)};
  const ViolationReport hit = check_completeness(logs, mdp, exact, ctx);
  CHECK(hit.total == 2);
  CHECK(hit.violations == 0);
  CHECK(hit.worst_slack == doctest::Approx(0.0));

  const std::vector<FunctionClass> coarse = {FunctionClass::grid(2, 1, 0.5, 2.0)};
  const ViolationReport miss = check_completeness(logs, mdp, coarse, ctx, 1);
  CHECK(miss.total == 1);
  CHECK(miss.violations == 1);
  CHECK(miss.worst_slack == doctest::Approx(0.25));
  ctx.eps = 0.25;
  CHECK(check_completeness(logs, mdp, coarse, ctx).violations == 0);
}
