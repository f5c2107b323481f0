#pragma once

// Episodic, time-inhomogeneous MDP simulators with exact dynamic-programming
// oracles. Levels are 0-based in this API: level `h` here is level h+1 in the
// usual 1..H numbering, and V at index H is the zero boundary.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "voql/common.hpp"

namespace voql {

enum class RewardModel {
  kDeterministic,
  // Realized reward is `bernoulli_payout` with probability mean/payout.
  kBernoulli,
};

struct MdpLevel {
  std::vector<double> transitions;  // num_pairs rows of num_states entries
  std::vector<double> rewards;      // mean reward per pair, in [0, 1]
};

// phi^h(x, a) in R^d with P^h(.|z) = <phi(z), mu^h(.)> and E[r|z] = <phi, theta>.
struct LinearStructure {
  int dim = 0;
  std::vector<Eigen::MatrixXd> features;        // num_pairs x dim
  std::vector<Eigen::MatrixXd> measures;        // dim x num_states
  std::vector<Eigen::VectorXd> reward_weights;  // dim
  std::vector<double> norm_bound;               // B^h
};

class EpisodicMdp {
 public:
  // Validates on construction; throws voql::Error on any broken invariant.
  EpisodicMdp(int num_states, int num_actions, std::vector<MdpLevel> levels,
              std::vector<double> initial,
              RewardModel reward_model = RewardModel::kDeterministic,
              std::optional<LinearStructure> linear = std::nullopt,
              std::uint64_t seed = 0);

  int horizon() const { return static_cast<int>(levels_.size()); }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int num_pairs() const { return num_states_ * num_actions_; }
  PairIndex pair(int x, int a) const { return x * num_actions_ + a; }

  std::span<const double> transition(int h, PairIndex z) const {
    return std::span<const double>(levels_[h].transitions)
        .subspan(static_cast<std::size_t>(z) * num_states_, num_states_);
  }
  double mean_reward(int h, PairIndex z) const { return levels_[h].rewards[z]; }
  double reward_variance(int h, PairIndex z) const;
  const MdpLevel& level(int h) const { return levels_[h]; }
  const std::vector<double>& initial() const { return initial_; }

  RewardModel reward_model() const { return reward_model_; }
  double bernoulli_payout() const { return bernoulli_payout_; }

  bool has_features() const { return linear_.has_value(); }
  const LinearStructure& linear() const;
  std::uint64_t seed() const { return seed_; }

  int sample_initial(Rng& rng) const { return rng.categorical(initial_); }
  int sample_next(int h, PairIndex z, Rng& rng) const {
    return rng.categorical(transition(h, z));
  }
  double sample_reward(int h, PairIndex z, Rng& rng) const;

  // Largest total reward along any positive-probability trajectory.
  double max_path_return() const;
  // max |P - Phi mu| and |r - Phi theta| over all levels; 0 without features.
  double factorization_residual() const;

 private:
  void validate() const;

  int num_states_;
  int num_actions_;
  std::vector<MdpLevel> levels_;
  std::vector<double> initial_;
  RewardModel reward_model_;
  double bernoulli_payout_ = 1.0;
  std::optional<LinearStructure> linear_;
  std::uint64_t seed_;
};

// Simplex features, row-stochastic measures, reward only at the last level.
EpisodicMdp gen_linear_mdp(int dim, int horizon, int num_states,
                           int num_actions, std::uint64_t seed);

struct TabularOptions {
  int horizon = 2;
  int num_states = 2;
  int num_actions = 2;
  std::uint64_t seed = 0;
  // Spread reward over all levels, each capped by 1/H; otherwise last level only.
  bool reward_every_level = false;
  // When positive, transition probabilities and the last-level rewards are
  // multiples of this value.
  double grid = 0.0;
  RewardModel reward_model = RewardModel::kDeterministic;
};

EpisodicMdp gen_tabular_mdp(const TabularOptions& options);

// One-hot features make any tabular instance linear with d = |X||A|.
EpisodicMdp embed_tabular_as_linear(const EpisodicMdp& mdp);

struct OptimalSolution {
  std::vector<QFunction> q;               // H levels
  std::vector<std::vector<double>> v;     // H + 1 levels, v[H] == 0
  double initial_value = 0.0;             // E_{x ~ mu} V*(x) at the first level
};

OptimalSolution solve_optimal(const EpisodicMdp& mdp);

struct ConditionalMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Exact E and V of r^h + f(x') given z, with f a function on states.
ConditionalMoments true_conditional(const EpisodicMdp& mdp,
                                    std::span<const double> next_values, int h,
                                    PairIndex z);

// max over (h, z) of |Q*^h - T V*^{h+1}|, with T evaluated via true_conditional.
double bellman_residual(const EpisodicMdp& mdp, const OptimalSolution& sol);

// E[sum_h V[r^h + V*^{h+1}(x') | z^h]] along the optimal greedy policy.
double optimal_total_variance(const EpisodicMdp& mdp, const OptimalSolution& sol);

struct ExplorationValue {
  double initial_value = 0.0;         // E_{x ~ mu} of the value below
  std::vector<double> by_state;       // value from each first-level state
  double switch_probability = 0.0;    // P(the flag ever flips)
};

// Exact value of the prefix-dependent rule: greedy on f1 until the first level
// with f1(x) < f2(x) - threshold, greedy on f2 from there on.
ExplorationValue evaluate_exploration_policy(const EpisodicMdp& mdp,
                                             const std::vector<QFunction>& f1,
                                             const std::vector<QFunction>& f2,
                                             double threshold);

// Value of the greedy (lowest-index argmax) policy of `q`.
double evaluate_greedy_policy(const EpisodicMdp& mdp,
                              const std::vector<QFunction>& q);

double evaluate_uniform_policy(const EpisodicMdp& mdp);

}  // namespace voql
