#include "voql/baselines.hpp"

#include <cmath>

namespace voql {
namespace {

// Same stream layout as the learner so that all algorithms see comparable
// environment randomness for a given seed.
constexpr std::uint64_t kEnvStream = 1;
constexpr std::uint64_t kPolicyStream = 2;

}  // namespace

double lsvi_default_beta(int dim, int H, int T, double delta, double c_scale) {
  require(delta > 0.0 && delta < 1.0, "lsvi-ucb: delta must lie in (0, 1)");
  return c_scale * dim * H * std::sqrt(std::log(2.0 * dim * H * T / delta));
}

LsviUcb::LsviUcb(const EpisodicMdp& mdp, LsviOptions options, std::uint64_t seed)
    : mdp_(mdp),
      options_(options),
      optimal_value_(solve_optimal(mdp).initial_value),
      env_rng_(derive_seed(seed, kEnvStream)) {
  require(mdp.has_features(), "lsvi-ucb: the instance has no linear features");
  require(options.lambda > 0.0, "lsvi-ucb: lambda must be positive");
  require(options.beta >= 0.0, "lsvi-ucb: beta must be non-negative");
  const int H = mdp.horizon();
  data_.assign(H, TransitionStats(mdp.num_pairs(), mdp.num_states()));
  counts_.assign(H, std::vector<double>(mdp.num_pairs(), 0.0));
  q_.assign(H, QFunction(mdp.num_states(), mdp.num_actions(), 1.0));
}

void LsviUcb::plan() {
  const int H = mdp_.horizon();
  const int nX = mdp_.num_states();
  const int nZ = mdp_.num_pairs();
  const auto& lin = mdp_.linear();
  const int d = lin.dim;
  std::vector<double> next(nX, 0.0);
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::MatrixXd& phi = lin.features[h];
    const RegressionStats stats = data_[h].targets(next, false);
    Eigen::MatrixXd gram = options_.lambda * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    for (PairIndex z = 0; z < nZ; ++z) {
      if (counts_[h][z] == 0.0) continue;
      const Eigen::VectorXd f = phi.row(z).transpose();
      gram.noalias() += counts_[h][z] * f * f.transpose();
      rhs.noalias() += stats.weighted_target[z] * f;
    }
    const Eigen::LDLT<Eigen::MatrixXd> solver(gram);
    const Eigen::VectorXd w = solver.solve(rhs);
    const Eigen::MatrixXd inv_phi = solver.solve(phi.transpose());  // d x nZ
    auto& vals = q_[h].mutable_values();
    for (PairIndex z = 0; z < nZ; ++z) {
      const double width = std::sqrt(std::max(0.0, phi.row(z).dot(inv_phi.col(z))));
      vals[z] = std::clamp(phi.row(z).dot(w) + options_.beta * width, 0.0, 1.0);
    }
    next = q_[h].state_values();
  }
}

RegretRecord LsviUcb::run_episode() {
  ++t_;
  if (t_ >= 2) plan();
  const int H = mdp_.horizon();
  RegretRecord rec;
  rec.episode = t_;
  rec.h_t = H + 1;
  rec.mean_sigma_bar = 1.0;
  int x = mdp_.sample_initial(env_rng_);
  for (int h = 0; h < H; ++h) {
    const PairIndex z = mdp_.pair(x, q_[h].greedy_action(x));
    const double r = mdp_.sample_reward(h, z, env_rng_);
    const int xn = mdp_.sample_next(h, z, env_rng_);
    data_[h].add(z, r, xn, 1.0);
    counts_[h][z] += 1.0;
    rec.realized_return += r;
    x = xn;
  }
  rec.v1_exact = evaluate_greedy_policy(mdp_, q_);
  rec.inst_regret = optimal_value_ - rec.v1_exact;
  cum_regret_ += rec.inst_regret;
  rec.cum_regret = cum_regret_;
  return rec;
}

std::vector<RegretRecord> LsviUcb::run(int episodes) {
  std::vector<RegretRecord> out;
  out.reserve(episodes);
  for (int i = 0; i < episodes; ++i) out.push_back(run_episode());
  return out;
}

UniformRandom::UniformRandom(const EpisodicMdp& mdp, std::uint64_t seed)
    : mdp_(mdp),
      optimal_value_(solve_optimal(mdp).initial_value),
      uniform_value_(evaluate_uniform_policy(mdp)),
      env_rng_(derive_seed(seed, kEnvStream)),
      policy_rng_(derive_seed(seed, kPolicyStream)) {}

RegretRecord UniformRandom::run_episode() {
  ++t_;
  const int H = mdp_.horizon();
  RegretRecord rec;
  rec.episode = t_;
  rec.h_t = H + 1;
  rec.mean_sigma_bar = 1.0;
  int x = mdp_.sample_initial(env_rng_);
  for (int h = 0; h < H; ++h) {
    const PairIndex z = mdp_.pair(x, policy_rng_.uniform_int(mdp_.num_actions()));
    rec.realized_return += mdp_.sample_reward(h, z, env_rng_);
    x = mdp_.sample_next(h, z, env_rng_);
  }
  rec.v1_exact = uniform_value_;
  // Exact zero when the policy is optimal, e.g. with a single action.
  rec.inst_regret = std::max(0.0, optimal_value_ - uniform_value_);
  if (mdp_.num_actions() == 1) rec.inst_regret = 0.0;
  cum_regret_ += rec.inst_regret;
  rec.cum_regret = cum_regret_;
  return rec;
}

std::vector<RegretRecord> UniformRandom::run(int episodes) {
  std::vector<RegretRecord> out;
  out.reserve(episodes);
  for (int i = 0; i < episodes; ++i) out.push_back(run_episode());
  return out;
}

}  // namespace voql
