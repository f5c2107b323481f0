#pragma once

// The variance-weighted optimistic learner: per episode a backward pass builds
// optimistic, over-optimistic and over-pessimistic value functions plus a
// second-moment fit, then a rollout under the switching rule collects data
// whose weights come from the variance over-estimate.

#include <memory>
#include <optional>
#include <vector>

#include "json.hpp"
#include "voql/bonus.hpp"
#include "voql/eluder.hpp"
#include "voql/env.hpp"
#include "voql/function_class.hpp"
#include "voql/params.hpp"

namespace voql {

// Per-(z, x') weighted sums of w, w r and w r^2 for one level, enough to form
// least-squares statistics for any target of the form g(r + f(x')).
class TransitionStats {
 public:
  TransitionStats(int num_pairs, int num_states);
  void add(PairIndex z, double reward, int next_state, double w);
  // Targets r + f(x'), or (r + f(x'))^2 when `squared` (constant term omitted).
  RegressionStats targets(std::span<const double> next_values, bool squared) const;

 private:
  int num_pairs_;
  int num_states_;
  std::vector<double> w_, wr_, wr2_;
};

enum class SecondMomentTarget { kOptimistic, kOverOptimistic };

struct VoqlOptions {
  OracleKind oracle = OracleKind::kElliptical;
  LinearDsqForm dsq_form = LinearDsqForm::kSurrogate;
  SecondMomentTarget second_target = SecondMomentTarget::kOptimistic;
  bool envelope = true;          // running-min consistency envelope on bonuses
  double C_sens = 1.0;           // sensitivity-sampling constant
  bool record_log = false;       // keep per-episode tables for offline audits
  bool check_invariants = false;  // count same-episode violations online
};

// Inputs and outputs of the weight rule at one visited pair.
struct VisitRecord {
  int h = 0;
  PairIndex z = 0;
  double reward = 0.0;
  int next_state = 0;
  double sigma_sq = 0.0;
  double sigma_bar = 0.0;
  double dsq_unit = 0.0;
  double dsq_bar = 0.0;
  double gap = 0.0;  // f2(z) - f_{-2}(z)
  double ghat = 0.0;
  double fhat_m2 = 0.0;
  double beta2 = 0.0;
  double beta_bar = 0.0;
  double iota = 0.0;
  double upsilon = 0.0;
};

struct EpisodeLog {
  int t = 0;
  double u = 0.0;
  int switch_level = 0;  // 1-based, H + 1 when the episode never switched
  double beta1 = 0.0;
  double beta2 = 0.0;
  std::vector<QFunction> f1, f2, fm2, fhat1, fhat2, fhat_m2, ghat, b1, b2;
  std::vector<VisitRecord> visits;
  int raw_consistency_violations = 0;
};

struct RegretRecord {
  int episode = 0;
  double realized_return = 0.0;
  double v1_exact = 0.0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  int h_t = 0;
  double mean_sigma_bar = 0.0;
  int violations = 0;
  int distinct_subsample = -1;  // largest subsampled-set size over levels
};

// sigma^2 = clamp(ghat - fhat_m2^2 + D_unit (sqrt(beta_bar^2 + lambda) +
// 2 L sqrt(beta2^2 + lambda)) + 2 (1 + L) eps, 0, 4), with D_unit = sqrt(dsq_unit).
double variance_estimate(double ghat, double fhat_m2, double dsq_unit, double beta_bar,
                         double beta2, double lambda, double L, double eps);

// max{sigma, alpha, sqrt(2) iota sqrt(gap), 2 (sqrt(upsilon) + iota) sqrt(D_bar)}
// with D_bar = sqrt(dsq_bar).
double sigma_bar_rule(double sigma, double alpha, double iota, double gap, double upsilon,
                      double dsq_bar);

class VoqlLearner {
 public:
  VoqlLearner(const EpisodicMdp& mdp, std::vector<FunctionClass> value_classes,
              std::vector<FunctionClass> second_classes, VoqlParams params,
              VoqlOptions options, std::uint64_t seed);

  // Runs the next episode: backward pass (from t = 2), rollout, data update.
  RegretRecord run_episode();
  std::vector<RegretRecord> run(int episodes);

  int episode() const { return t_; }
  const VoqlParams& params() const { return params_; }
  const std::vector<EpisodeLog>& logs() const { return logs_; }
  const std::vector<QFunction>& f1() const { return f1_; }
  const std::vector<QFunction>& f2() const { return f2_; }
  const std::vector<QFunction>& fm2() const { return fm2_; }
  const UncertaintyContext& unit_context(int h) const { return *levels_[h].ctx_unit; }
  const UncertaintyContext& bar_context(int h) const { return *levels_[h].ctx_bar; }
  const FunctionClass& value_class(int h) const { return value_classes_[h]; }
  int total_raw_consistency_violations() const { return raw_violations_total_; }
  // |T_oo|: episodes that switched to the over-optimistic policy.
  int switched_episodes() const { return switched_episodes_; }

 private:
  struct Level {
    TransitionStats weighted;
    TransitionStats unit;
    std::unique_ptr<UncertaintyContext> ctx_unit;
    std::unique_ptr<UncertaintyContext> ctx_bar;
    std::unique_ptr<BonusOracle> oracle1;
    std::unique_ptr<BonusOracle> oracle2;
    std::optional<BonusFn> prev_b1;
    std::optional<BonusFn> prev_b2;
  };

  void backward_pass(int t, EpisodeLog& log);
  SensitivityParams sensitivity(double beta) const;

  const EpisodicMdp& mdp_;
  std::vector<FunctionClass> value_classes_;
  std::vector<FunctionClass> second_classes_;
  VoqlParams params_;
  VoqlOptions options_;
  std::vector<Level> levels_;
  std::vector<QFunction> f1_, f2_, fm2_, fhat1_, fhat2_, fhat_m2_, ghat_, b1_, b2_;
  OptimalSolution optimal_;
  Rng env_rng_;
  Rng policy_rng_;
  Rng oracle_rng_;
  int t_ = 0;
  double cum_regret_ = 0.0;
  int raw_violations_total_ = 0;
  int switched_episodes_ = 0;
  std::vector<EpisodeLog> logs_;
};

}  // namespace voql
