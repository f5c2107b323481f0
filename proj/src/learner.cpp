#include "voql/learner.hpp"

#include <cmath>

namespace voql {
namespace {

constexpr double kCheckTol = 1e-9;

enum RngStream : std::uint64_t { kEnvStream = 1, kPolicyStream = 2, kOracleStream = 3 };

}  // namespace

TransitionStats::TransitionStats(int num_pairs, int num_states)
    : num_pairs_(num_pairs),
      num_states_(num_states),
      w_(static_cast<std::size_t>(num_pairs) * num_states, 0.0),
      wr_(w_.size(), 0.0),
      wr2_(w_.size(), 0.0) {}

void TransitionStats::add(PairIndex z, double reward, int next_state, double w) {
  const std::size_t k = static_cast<std::size_t>(z) * num_states_ + next_state;
  w_[k] += w;
  wr_[k] += w * reward;
  wr2_[k] += w * reward * reward;
}

RegressionStats TransitionStats::targets(std::span<const double> next_values,
                                         bool squared) const {
  RegressionStats stats(num_pairs_);
  for (int z = 0; z < num_pairs_; ++z) {
    double w = 0.0, wy = 0.0, wy2 = 0.0;
    for (int y = 0; y < num_states_; ++y) {
      const std::size_t k = static_cast<std::size_t>(z) * num_states_ + y;
      if (w_[k] == 0.0) continue;
      const double f = next_values[y];
      // sum w (r + f) and sum w (r + f)^2 over samples landing in y.
      const double first = wr_[k] + w_[k] * f;
      const double second = wr2_[k] + 2.0 * f * wr_[k] + w_[k] * f * f;
      w += w_[k];
      if (squared) {
        wy += second;
      } else {
        wy += first;
        wy2 += second;
      }
    }
    stats.weight[z] = w;
    stats.weighted_target[z] = wy;
    stats.constant += wy2;
  }
  return stats;
}

double variance_estimate(double ghat, double fhat_m2, double dsq_unit, double beta_bar,
                         double beta2, double lambda, double L, double eps) {
  const double width = std::sqrt(dsq_unit) * (std::sqrt(beta_bar * beta_bar + lambda) +
                                              2.0 * L * std::sqrt(beta2 * beta2 + lambda));
  const double raw = ghat - fhat_m2 * fhat_m2 + width + 2.0 * (1.0 + L) * eps;
  return std::max(0.0, std::min(4.0, raw));
}

double sigma_bar_rule(double sigma, double alpha, double iota, double gap, double upsilon,
                      double dsq_bar) {
  const double spread = std::sqrt(2.0) * iota * std::sqrt(std::max(0.0, gap));
  const double uncertainty = 2.0 * (std::sqrt(upsilon) + iota) * std::sqrt(std::sqrt(dsq_bar));
  return std::max(std::max(sigma, alpha), std::max(spread, uncertainty));
}

VoqlLearner::VoqlLearner(const EpisodicMdp& mdp, std::vector<FunctionClass> value_classes,
                         std::vector<FunctionClass> second_classes, VoqlParams params,
                         VoqlOptions options, std::uint64_t seed)
    : mdp_(mdp),
      value_classes_(std::move(value_classes)),
      second_classes_(std::move(second_classes)),
      params_(std::move(params)),
      options_(options),
      optimal_(solve_optimal(mdp)),
      env_rng_(derive_seed(seed, kEnvStream)),
      policy_rng_(derive_seed(seed, kPolicyStream)),
      oracle_rng_(derive_seed(seed, kOracleStream)) {
  const int H = mdp_.horizon();
  require(static_cast<int>(value_classes_.size()) == H &&
              static_cast<int>(second_classes_.size()) == H,
          "voql: need one value class and one second-moment class per level");
  require(params_.H() == H, "voql: parameter horizon differs from the instance");
  const int n_pairs = mdp_.num_pairs();
  for (int h = 0; h < H; ++h) {
    require(value_classes_[h].num_pairs() == n_pairs && second_classes_[h].num_pairs() == n_pairs,
            "voql: class grid does not match the instance");
  }
  levels_.reserve(H);
  for (int h = 0; h < H; ++h) {
    const auto& cls = value_classes_[h];
    Level lvl{TransitionStats(n_pairs, mdp_.num_states()),
              TransitionStats(n_pairs, mdp_.num_states()),
              make_uncertainty(cls, params_.lambda(), options_.dsq_form),
              make_uncertainty(cls, params_.lambda(), options_.dsq_form),
              make_bonus_oracle(options_.oracle, cls, params_.lambda()),
              make_bonus_oracle(options_.oracle, cls, params_.lambda()),
              std::nullopt,
              std::nullopt};
    levels_.push_back(std::move(lvl));
  }
  const int nX = mdp_.num_states();
  const int nA = mdp_.num_actions();
  // Episode-one defaults: full optimism and the widest variance band.
  f1_.assign(H, QFunction(nX, nA, 1.0));
  f2_.assign(H, QFunction(nX, nA, 2.0));
  fm2_.assign(H, QFunction(nX, nA, 0.0));
  fhat1_.assign(H, QFunction(nX, nA, 0.0));
  fhat2_.assign(H, QFunction(nX, nA, 0.0));
  fhat_m2_.assign(H, QFunction(nX, nA, 0.0));
  ghat_.assign(H, QFunction(nX, nA, 4.0));
  b1_.assign(H, QFunction(nX, nA, 0.0));
  b2_.assign(H, QFunction(nX, nA, 0.0));
}

SensitivityParams VoqlLearner::sensitivity(double beta) const {
  SensitivityParams sp;
  sp.beta = beta;
  sp.alpha = params_.alpha();
  sp.C = options_.C_sens;
  sp.delta = params_.delta();
  sp.T = params_.T();
  sp.H = params_.H();
  return sp;
}

void VoqlLearner::backward_pass(int t, EpisodeLog& log) {
  const int H = mdp_.horizon();
  const int nX = mdp_.num_states();
  const double eps = params_.eps();
  std::vector<double> next1(nX, 0.0), next2(nX, 0.0), nextm2(nX, 0.0);
  for (int h = H - 1; h >= 0; --h) {
    Level& lvl = levels_[h];
    const auto& cls = value_classes_[h];
    const double lambda = params_.lambda();

    const Fit fit1 = regress(cls, lvl.weighted.targets(next1, false),
                             RegressionMethod::kAuto, lambda);
    BonusFn b1 = lvl.oracle1->bonus(fit1.values, params_.beta1(t), t, h);
    if (options_.envelope && lvl.prev_b1) {
      auto env = enforce_consistency(b1, *lvl.prev_b1);
      log.raw_consistency_violations += env.raw_violations;
      b1 = std::move(env.bonus);
    }
    f1_[h] = clip_compose(fit1.values, b1.values, eps, 0.0, 1.0);

    const Fit fit2 = regress(cls, lvl.unit.targets(next2, false), RegressionMethod::kAuto, lambda);
    const Fit fitm2 =
        regress(cls, lvl.unit.targets(nextm2, false), RegressionMethod::kAuto, lambda);
    BonusFn b2 = lvl.oracle2->bonus(fit2.values, params_.beta2(t), t, h);
    if (options_.envelope && lvl.prev_b2) {
      auto env = enforce_consistency(b2, *lvl.prev_b2);
      log.raw_consistency_violations += env.raw_violations;
      b2 = std::move(env.bonus);
    }
    QFunction widening = b1.values;
    for (int z = 0; z < widening.num_pairs(); ++z) widening[z] = 2.0 * b1.values[z] + b2.values[z];
    f2_[h] = clip_compose(fit2.values, widening, 3.0 * eps, 0.0, 2.0);
    QFunction neg_b2 = b2.values;
    for (auto& v : neg_b2.mutable_values()) v = -v;
    fm2_[h] = clip_compose(fitm2.values, neg_b2, -eps, 0.0, params_.L());
    fhat1_[h] = fit1.values;
    fhat2_[h] = fit2.values;
    fhat_m2_[h] = fitm2.values;

    const auto& second_next =
        options_.second_target == SecondMomentTarget::kOptimistic ? next1 : next2;
    ghat_[h] = regress(second_classes_[h], lvl.unit.targets(second_next, true),
                       RegressionMethod::kAuto, lambda)
                   .values;
    b1_[h] = b1.values;
    b2_[h] = b2.values;
    lvl.prev_b1 = std::move(b1);
    lvl.prev_b2 = std::move(b2);

    next1 = f1_[h].state_values();
    next2 = f2_[h].state_values();
    nextm2 = fm2_[h].state_values();
  }
}

RegretRecord VoqlLearner::run_episode() {
  ++t_;
  const int t = t_;
  const int H = mdp_.horizon();
  EpisodeLog log;
  log.t = t;
  if (t >= 2) backward_pass(t, log);
  raw_violations_total_ += log.raw_consistency_violations;

  RegretRecord rec;
  rec.episode = t;
  rec.h_t = H + 1;
  const double u = params_.u(t);
  log.u = u;
  log.beta1 = params_.beta1(t);
  log.beta2 = params_.beta2(t);

  // Rollout.
  std::vector<PairIndex> zs(H);
  std::vector<double> rewards(H);
  std::vector<int> nexts(H);
  int x = mdp_.sample_initial(env_rng_);
  bool switched = false;
  for (int h = 0; h < H; ++h) {
    int a = 0;
    if (t == 1) {
      a = policy_rng_.uniform_int(mdp_.num_actions());
    } else {
      if (!switched && f1_[h].state_value(x) < f2_[h].state_value(x) - u) {
        switched = true;
        rec.h_t = h + 1;
      }
      a = switched ? f2_[h].greedy_action(x) : f1_[h].greedy_action(x);
    }
    const PairIndex z = mdp_.pair(x, a);
    const double r = mdp_.sample_reward(h, z, env_rng_);
    const int xn = mdp_.sample_next(h, z, env_rng_);
    zs[h] = z;
    rewards[h] = r;
    nexts[h] = xn;
    rec.realized_return += r;
    x = xn;
  }
  if (switched) ++switched_episodes_;
  log.switch_level = rec.h_t;

  rec.v1_exact = t == 1 ? evaluate_uniform_policy(mdp_)
                        : evaluate_exploration_policy(mdp_, f1_, f2_, u).initial_value;
  rec.inst_regret = optimal_.initial_value - rec.v1_exact;
  cum_regret_ += rec.inst_regret;
  rec.cum_regret = cum_regret_;

  // Weights at the visited pairs use the history before this episode.
  double sigma_bar_sum = 0.0;
  std::vector<VisitRecord> visits(H);
  for (int h = 0; h < H; ++h) {
    Level& lvl = levels_[h];
    VisitRecord& v = visits[h];
    v.h = h;
    v.z = zs[h];
    v.reward = rewards[h];
    v.next_state = nexts[h];
    v.dsq_unit = lvl.ctx_unit->dsq(v.z);
    v.dsq_bar = lvl.ctx_bar->dsq(v.z);
    v.beta2 = params_.beta2(t);
    v.beta_bar = params_.beta_bar(t);
    v.iota = params_.iota();
    v.upsilon = params_.upsilon();
    v.ghat = ghat_[h][v.z];
    v.fhat_m2 = fhat_m2_[h][v.z];
    v.gap = f2_[h][v.z] - fm2_[h][v.z];
    v.sigma_sq = t == 1 ? 4.0
                        : variance_estimate(v.ghat, v.fhat_m2, v.dsq_unit, v.beta_bar, v.beta2,
                                            params_.lambda(), params_.L(), params_.eps());
    v.sigma_bar = sigma_bar_rule(std::sqrt(v.sigma_sq), params_.alpha(), v.iota, v.gap,
                                 v.upsilon, v.dsq_bar);
    sigma_bar_sum += v.sigma_bar;
  }
  for (int h = 0; h < H; ++h) {
    Level& lvl = levels_[h];
    const VisitRecord& v = visits[h];
    lvl.weighted.add(v.z, v.reward, v.next_state, 1.0 / (v.sigma_bar * v.sigma_bar));
    lvl.unit.add(v.z, v.reward, v.next_state, 1.0);
    lvl.ctx_unit->append(v.z, 1.0);
    lvl.ctx_bar->append(v.z, v.sigma_bar);
    lvl.oracle1->append(v.z, v.sigma_bar, sensitivity(params_.beta1(t)), oracle_rng_);
    lvl.oracle2->append(v.z, 1.0, sensitivity(params_.beta2(t)), oracle_rng_);
    rec.distinct_subsample = std::max({rec.distinct_subsample, lvl.oracle1->distinct_count(),
                                       lvl.oracle2->distinct_count()});
  }
  rec.mean_sigma_bar = sigma_bar_sum / H;

  if (options_.check_invariants) {
    for (int h = 0; h < H; ++h) {
      const auto& q = optimal_.q[h];
      for (int z = 0; z < q.num_pairs(); ++z) {
        rec.violations += fm2_[h][z] > q[z] + kCheckTol;
        rec.violations += q[z] > f1_[h][z] + kCheckTol;
        rec.violations += f1_[h][z] > f2_[h][z] + kCheckTol;
      }
      const double true_var = true_conditional(mdp_, optimal_.v[h + 1], h, zs[h]).variance;
      rec.violations += visits[h].sigma_sq + kCheckTol < true_var;
    }
  }

  if (options_.record_log) {
    log.f1 = f1_;
    log.f2 = f2_;
    log.fm2 = fm2_;
    log.fhat1 = fhat1_;
    log.fhat2 = fhat2_;
    log.fhat_m2 = fhat_m2_;
    log.ghat = ghat_;
    log.b1 = b1_;
    log.b2 = b2_;
    log.visits = std::move(visits);
    logs_.push_back(std::move(log));
  }
  return rec;
}

std::vector<RegretRecord> VoqlLearner::run(int episodes) {
  std::vector<RegretRecord> out;
  out.reserve(episodes);
  for (int i = 0; i < episodes; ++i) out.push_back(run_episode());
  return out;
}

}  // namespace voql
