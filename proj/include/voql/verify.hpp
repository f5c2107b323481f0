#pragma once

// Offline audits of a learner run against simulator ground truth.

#include <string>
#include <vector>

#include "json.hpp"
#include "voql/bonus.hpp"
#include "voql/eluder.hpp"
#include "voql/env.hpp"
#include "voql/function_class.hpp"
#include "voql/learner.hpp"

namespace voql {

struct ViolationReport {
  std::string name;
  long long total = 0;
  long long violations = 0;
  // Largest lhs - rhs over comparisons of the form lhs <= rhs; -inf when empty.
  double worst_slack = -kInf;
  nlohmann::json samples = nlohmann::json::array();
  std::string note;

  double rate() const { return total == 0 ? 0.0 : static_cast<double>(violations) / total; }
  // Records lhs <= rhs (with tolerance) and returns whether it held.
  bool compare(double lhs, double rhs, double tol, const nlohmann::json& where);
  // Records a pass/fail outcome with an externally computed slack.
  bool record(bool ok, double slack, const nlohmann::json& where);
  nlohmann::json to_json() const;
};

// Scalars of the run that the audits need.
struct RunContext {
  int H = 0;
  double alpha = 0.0;
  double lambda = 1.0;
  double L = 2.0;
  double eps = 0.0;
};

struct AuditGrid {
  int z_points = 64;    // pairs per level; all pairs when the grid is smaller
  int s_samples = 4;    // earlier episodes per t, log-uniform in [1, t]
  std::uint64_t seed = 0;
};

// f_{s,-2} <= Q* <= f_{t,1} <= f_{s,2} and T f_{t,1}^{h+1} <= f_{s,2} for s <= t.
ViolationReport check_monotonicity(const std::vector<EpisodeLog>& logs, const EpisodicMdp& mdp,
                                   const OptimalSolution& opt, const AuditGrid& grid = {});

// Lower and upper variance sandwich at every visited pair.
ViolationReport check_variance_lower(const std::vector<EpisodeLog>& logs, const EpisodicMdp& mdp,
                                     const OptimalSolution& opt);
ViolationReport check_variance_upper(const std::vector<EpisodeLog>& logs, const EpisodicMdp& mdp,
                                     const RunContext& ctx);

// Rebuilds D^2 under the logged weights from scratch and recomputes every
// variance estimate and weight; any bit difference counts as a violation.
ViolationReport check_sigma_bar_replay(const std::vector<EpisodeLog>& logs,
                                       const std::vector<FunctionClass>& value_classes,
                                       const RunContext& ctx, LinearDsqForm form);

// Clip ranges, switch-level range, the weight floor and the variance cap.
ViolationReport check_ranges(const std::vector<EpisodeLog>& logs, const RunContext& ctx);

// Element-wise non-increase of a bonus sequence at one level.
ViolationReport check_consistency(const std::vector<QFunction>& sequence,
                                  const std::string& name = "bonus_consistency");

// Property 2 (b >= exact version-space sup) and property 3
// (b <= C (D sqrt(beta^2 + lambda) + eps_b beta)) for one bonus.
void check_bonus_contract(ViolationReport& dominance, ViolationReport& cap,
                          const BonusFn& bonus, const FunctionClass& cls,
                          std::span<const double> center, std::span<const double> weight,
                          double beta, const UncertaintyContext& uncertainty, double C,
                          double eps_b, double lambda);

// Both legs vs(beta) <= subsample <= vs(100 beta) pointwise, plus the size bound.
void check_subsample(ViolationReport& sandwich, ViolationReport& size,
                     const SubsampledSet& set, const FunctionClass& cls,
                     std::span<const double> center, std::span<const double> full_weight,
                     double beta, int size_bound);

// Realized completeness error: sup-norm distance from the exact backup
// T f_{t,1}^{h+1} to the value class, compared with the assumed eps, on at most
// `max_episodes` evenly spaced episodes. Implicit linear covers report the
// error of the snapped least-squares weights, an upper bound on the distance.
ViolationReport check_completeness(const std::vector<EpisodeLog>& logs, const EpisodicMdp& mdp,
                                   const std::vector<FunctionClass>& value_classes,
                                   const RunContext& ctx, int max_episodes = 32);

// Logged bonuses at every level of a run must be element-wise non-increasing.
ViolationReport check_run_consistency(const std::vector<EpisodeLog>& logs);

struct VerifySummary {
  std::vector<ViolationReport> reports;
  bool breach = false;
  nlohmann::json to_json() const;
};

// Monotonicity and the two variance bounds are budgeted at a violation rate of
// max(delta, 0.05). Replay and ranges must hold exactly. Consistency of the
// logged bonuses and the completeness error are reported but never count as
// a breach.
VerifySummary verify_run(const std::vector<EpisodeLog>& logs, const EpisodicMdp& mdp,
                         const std::vector<FunctionClass>& value_classes, const RunContext& ctx,
                         LinearDsqForm form, double delta, const AuditGrid& grid = {});

nlohmann::json episode_logs_to_json(const std::vector<EpisodeLog>& logs);
std::vector<EpisodeLog> episode_logs_from_json(const nlohmann::json& doc, int num_states,
                                               int num_actions);

}  // namespace voql
