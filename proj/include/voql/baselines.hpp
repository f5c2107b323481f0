#pragma once

// Comparison algorithms sharing the simulator and regret accounting of the
// learner: optimistic least-squares value iteration with unit weights and an
// elliptical bonus, and a uniformly random policy.

#include <vector>

#include "voql/env.hpp"
#include "voql/learner.hpp"

namespace voql {

struct LsviOptions {
  double lambda = 1.0;
  double beta = 1.0;  // bonus multiplier on |phi|_{Lambda^-1}
};

// beta = c_scale d H sqrt(log(2 d H T / delta)).
double lsvi_default_beta(int dim, int H, int T, double delta, double c_scale);

class LsviUcb {
 public:
  // Requires linear features on `mdp`.
  LsviUcb(const EpisodicMdp& mdp, LsviOptions options, std::uint64_t seed);

  RegretRecord run_episode();
  std::vector<RegretRecord> run(int episodes);
  const std::vector<QFunction>& q() const { return q_; }

 private:
  void plan();

  const EpisodicMdp& mdp_;
  LsviOptions options_;
  std::vector<TransitionStats> data_;
  std::vector<std::vector<double>> counts_;  // visits per pair and level
  std::vector<QFunction> q_;
  double optimal_value_;
  Rng env_rng_;
  int t_ = 0;
  double cum_regret_ = 0.0;
};

class UniformRandom {
 public:
  UniformRandom(const EpisodicMdp& mdp, std::uint64_t seed);
  RegretRecord run_episode();
  std::vector<RegretRecord> run(int episodes);

 private:
  const EpisodicMdp& mdp_;
  double optimal_value_;
  double uniform_value_;
  Rng env_rng_;
  Rng policy_rng_;
  int t_ = 0;
  double cum_regret_ = 0.0;
};

}  // namespace voql
