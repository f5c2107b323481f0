#include "voql/env.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace voql {
namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kFactorizationTol = 1e-10;

std::vector<double> dirichlet_ones(int n, Rng& rng) {
  std::vector<double> w(n);
  double total = 0.0;
  for (double& wi : w) {
    wi = -std::log(1.0 - rng.uniform());
    total += wi;
  }
  for (double& wi : w) wi /= total;
  return w;
}

// Splits 1 into multiples of `grid` spread uniformly at random over n bins.
std::vector<double> grid_distribution(int n, double grid, Rng& rng) {
  const int units = static_cast<int>(std::lround(1.0 / grid));
  std::vector<int> counts(n, 0);
  for (int u = 0; u < units; ++u) ++counts[rng.uniform_int(n)];
  std::vector<double> p(n);
  for (int i = 0; i < n; ++i) p[i] = counts[i] * grid;
  return p;
}

}  // namespace

EpisodicMdp::EpisodicMdp(int num_states, int num_actions,
                         std::vector<MdpLevel> levels,
                         std::vector<double> initial, RewardModel reward_model,
                         std::optional<LinearStructure> linear,
                         std::uint64_t seed)
    : num_states_(num_states),
      num_actions_(num_actions),
      levels_(std::move(levels)),
      initial_(std::move(initial)),
      reward_model_(reward_model),
      linear_(std::move(linear)),
      seed_(seed) {
  require(num_states_ >= 1 && num_actions_ >= 1,
          "mdp: need at least one state and one action");
  require(!levels_.empty(), "mdp: horizon must be positive");
  if (reward_model_ == RewardModel::kBernoulli) {
    int rewarded_levels = 0;
    for (const auto& lvl : levels_) {
      bool any = false;
      for (double r : lvl.rewards) any = any || r > 0.0;
      rewarded_levels += any ? 1 : 0;
    }
    bernoulli_payout_ = 1.0 / std::max(1, rewarded_levels);
  }
  validate();
}

const LinearStructure& EpisodicMdp::linear() const {
  require(linear_.has_value(), "mdp: instance carries no linear features");
  return *linear_;
}

double EpisodicMdp::reward_variance(int h, PairIndex z) const {
  const double r = mean_reward(h, z);
  if (reward_model_ == RewardModel::kDeterministic) return 0.0;
  return std::max(0.0, r * bernoulli_payout_ - r * r);
}

double EpisodicMdp::sample_reward(int h, PairIndex z, Rng& rng) const {
  const double r = mean_reward(h, z);
  if (reward_model_ == RewardModel::kDeterministic) return r;
  return rng.bernoulli(r / bernoulli_payout_) ? bernoulli_payout_ : 0.0;
}

double EpisodicMdp::max_path_return() const {
  std::vector<double> next(num_states_, 0.0);
  for (int h = horizon() - 1; h >= 0; --h) {
    std::vector<double> cur(num_states_, -kInf);
    for (int x = 0; x < num_states_; ++x) {
      for (int a = 0; a < num_actions_; ++a) {
        const PairIndex z = pair(x, a);
        double r = mean_reward(h, z);
        if (reward_model_ == RewardModel::kBernoulli && r > 0.0) {
          r = bernoulli_payout_;
        }
        double tail = 0.0;
        const auto row = transition(h, z);
        for (int y = 0; y < num_states_; ++y) {
          if (row[y] > 0.0) tail = std::max(tail, next[y]);
        }
        cur[x] = std::max(cur[x], r + tail);
      }
    }
    next = std::move(cur);
  }
  double best = 0.0;
  for (int x = 0; x < num_states_; ++x) {
    if (initial_[x] > 0.0) best = std::max(best, next[x]);
  }
  return best;
}

double EpisodicMdp::factorization_residual() const {
  if (!linear_) return 0.0;
  double worst = 0.0;
  for (int h = 0; h < horizon(); ++h) {
    const Eigen::MatrixXd p = linear_->features[h] * linear_->measures[h];
    const Eigen::VectorXd r = linear_->features[h] * linear_->reward_weights[h];
    for (PairIndex z = 0; z < num_pairs(); ++z) {
      const auto row = transition(h, z);
      for (int y = 0; y < num_states_; ++y) {
        worst = std::max(worst, std::abs(p(z, y) - row[y]));
      }
      worst = std::max(worst, std::abs(r(z) - mean_reward(h, z)));
    }
  }
  return worst;
}

void EpisodicMdp::validate() const {
  const auto n_pairs = static_cast<std::size_t>(num_pairs());
  require(initial_.size() == static_cast<std::size_t>(num_states_),
          "mdp: initial distribution has the wrong length");
  double mass = 0.0;
  for (double p : initial_) {
    require(p >= 0.0, "mdp: negative initial probability");
    mass += p;
  }
  require(std::abs(mass - 1.0) <= kStochasticTol,
          "mdp: initial distribution does not sum to 1");
  for (int h = 0; h < horizon(); ++h) {
    const auto& lvl = levels_[h];
    const std::string where = "mdp level " + std::to_string(h + 1) + ": ";
    require(lvl.transitions.size() == n_pairs * num_states_,
            where + "transition table has the wrong size");
    require(lvl.rewards.size() == n_pairs, where + "reward table has the wrong size");
    for (PairIndex z = 0; z < num_pairs(); ++z) {
      double row_mass = 0.0;
      for (double p : transition(h, z)) {
        require(p >= 0.0 && std::isfinite(p), where + "negative transition probability");
        row_mass += p;
      }
      require(std::abs(row_mass - 1.0) <= kStochasticTol,
              where + "transition row " + std::to_string(z) + " does not sum to 1");
      const double r = lvl.rewards[z];
      require(r >= 0.0 && r <= 1.0, where + "mean reward outside [0, 1]");
      if (reward_model_ == RewardModel::kBernoulli) {
        require(r <= bernoulli_payout_ + kStochasticTol,
                where + "mean reward exceeds the Bernoulli payout");
      }
    }
  }
  require(max_path_return() <= 1.0 + kStochasticTol,
          "mdp: some trajectory collects total reward above 1");
  if (linear_) {
    const auto& lin = *linear_;
    require(lin.dim >= 1, "mdp: feature dimension must be positive");
    require(lin.features.size() == levels_.size() &&
                lin.measures.size() == levels_.size() &&
                lin.reward_weights.size() == levels_.size() &&
                lin.norm_bound.size() == levels_.size(),
            "mdp: linear structure must cover every level");
    for (int h = 0; h < horizon(); ++h) {
      require(lin.features[h].rows() == num_pairs() && lin.features[h].cols() == lin.dim,
              "mdp: feature matrix has the wrong shape");
      require(lin.measures[h].rows() == lin.dim && lin.measures[h].cols() == num_states_,
              "mdp: measure matrix has the wrong shape");
      require(lin.reward_weights[h].size() == lin.dim, "mdp: theta has the wrong length");
      for (PairIndex z = 0; z < num_pairs(); ++z) {
        require(lin.features[h].row(z).allFinite(), "mdp: non-finite feature");
        require(lin.features[h].row(z).norm() <= 1.0 + kStochasticTol,
                "mdp: feature norm exceeds 1");
      }
    }
    require(factorization_residual() <= kFactorizationTol,
            "mdp: transitions/rewards do not factor through the features");
  }
}

EpisodicMdp gen_linear_mdp(int dim, int horizon, int num_states,
                           int num_actions, std::uint64_t seed) {
  require(dim >= 1 && horizon >= 1, "gen_linear_mdp: need d >= 1 and H >= 1");
  require(num_states >= 2 && num_actions >= 2,
          "gen_linear_mdp: need at least 2 states and 2 actions");
  require(dim <= num_states * num_actions,
          "gen_linear_mdp: d exceeds |X||A|; use a tabular instance instead");
  Rng rng(seed);
  const int n_pairs = num_states * num_actions;
  LinearStructure lin;
  lin.dim = dim;
  std::vector<MdpLevel> levels(horizon);
  for (int h = 0; h < horizon; ++h) {
    Eigen::MatrixXd phi(n_pairs, dim);
    for (int z = 0; z < n_pairs; ++z) {
      const auto w = dirichlet_ones(dim, rng);
      for (int i = 0; i < dim; ++i) phi(z, i) = w[i];
    }
    Eigen::MatrixXd mu(dim, num_states);
    for (int i = 0; i < dim; ++i) {
      const auto row = dirichlet_ones(num_states, rng);
      for (int y = 0; y < num_states; ++y) mu(i, y) = row[y];
    }
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
    if (h == horizon - 1) {
      for (int i = 0; i < dim; ++i) theta(i) = rng.uniform();
    }
    const Eigen::MatrixXd p = phi * mu;
    const Eigen::VectorXd r = phi * theta;
    auto& lvl = levels[h];
    lvl.transitions.resize(static_cast<std::size_t>(n_pairs) * num_states);
    lvl.rewards.resize(n_pairs);
    for (int z = 0; z < n_pairs; ++z) {
      // Renormalize away rounding so rows sum to 1 to machine precision.
      double row_mass = 0.0;
      for (int y = 0; y < num_states; ++y) row_mass += p(z, y);
      for (int y = 0; y < num_states; ++y) {
        lvl.transitions[static_cast<std::size_t>(z) * num_states + y] = p(z, y) / row_mass;
      }
      lvl.rewards[z] = std::clamp(r(z), 0.0, 1.0);
    }
    const double b = mu.rowwise().sum().norm() + theta.norm();
    lin.features.push_back(std::move(phi));
    lin.measures.push_back(std::move(mu));
    lin.reward_weights.push_back(std::move(theta));
    lin.norm_bound.push_back(std::max(b, 1.0));
  }
  std::vector<double> initial(num_states, 1.0 / num_states);
  return EpisodicMdp(num_states, num_actions, std::move(levels), std::move(initial),
                     RewardModel::kDeterministic, std::move(lin), seed);
}

EpisodicMdp gen_tabular_mdp(const TabularOptions& o) {
  require(o.horizon >= 1 && o.num_states >= 1 && o.num_actions >= 1,
          "gen_tabular_mdp: dimensions must be positive");
  require(o.grid >= 0.0 && o.grid <= 1.0, "gen_tabular_mdp: grid must lie in [0, 1]");
  Rng rng(o.seed);
  const int n_pairs = o.num_states * o.num_actions;
  std::vector<MdpLevel> levels(o.horizon);
  for (int h = 0; h < o.horizon; ++h) {
    auto& lvl = levels[h];
    lvl.transitions.reserve(static_cast<std::size_t>(n_pairs) * o.num_states);
    for (int z = 0; z < n_pairs; ++z) {
      const auto row = o.grid > 0.0 ? grid_distribution(o.num_states, o.grid, rng)
                                    : dirichlet_ones(o.num_states, rng);
      lvl.transitions.insert(lvl.transitions.end(), row.begin(), row.end());
    }
    lvl.rewards.assign(n_pairs, 0.0);
    if (o.reward_every_level) {
      for (double& r : lvl.rewards) r = rng.uniform() / o.horizon;
    } else if (h == o.horizon - 1) {
      for (double& r : lvl.rewards) {
        if (o.grid > 0.0) {
          const int units = static_cast<int>(std::lround(1.0 / o.grid));
          r = rng.uniform_int(units + 1) * o.grid;
        } else {
          r = rng.uniform();
        }
      }
    }
  }
  std::vector<double> initial(o.num_states, 1.0 / o.num_states);
  return EpisodicMdp(o.num_states, o.num_actions, std::move(levels), std::move(initial),
                     o.reward_model, std::nullopt, o.seed);
}

EpisodicMdp embed_tabular_as_linear(const EpisodicMdp& mdp) {
  const int n_pairs = mdp.num_pairs();
  const int n_states = mdp.num_states();
  LinearStructure lin;
  lin.dim = n_pairs;
  std::vector<MdpLevel> levels;
  for (int h = 0; h < mdp.horizon(); ++h) {
    levels.push_back(mdp.level(h));
    Eigen::MatrixXd mu(n_pairs, n_states);
    Eigen::VectorXd theta(n_pairs);
    for (PairIndex z = 0; z < n_pairs; ++z) {
      const auto row = mdp.transition(h, z);
      for (int y = 0; y < n_states; ++y) mu(z, y) = row[y];
      theta(z) = mdp.mean_reward(h, z);
    }
    lin.features.push_back(Eigen::MatrixXd::Identity(n_pairs, n_pairs));
    lin.norm_bound.push_back(std::max(mu.rowwise().sum().norm() + theta.norm(), 1.0));
    lin.measures.push_back(std::move(mu));
    lin.reward_weights.push_back(std::move(theta));
  }
  return EpisodicMdp(n_states, mdp.num_actions(), std::move(levels), mdp.initial(),
                     mdp.reward_model(), std::move(lin), mdp.seed());
}

OptimalSolution solve_optimal(const EpisodicMdp& mdp) {
  const int H = mdp.horizon();
  const int n_states = mdp.num_states();
  const int n_actions = mdp.num_actions();
  OptimalSolution sol;
  sol.q.assign(H, QFunction(n_states, n_actions));
  sol.v.assign(H + 1, std::vector<double>(n_states, 0.0));
  for (int h = H - 1; h >= 0; --h) {
    for (PairIndex z = 0; z < mdp.num_pairs(); ++z) {
      const auto row = mdp.transition(h, z);
      double tail = 0.0;
      for (int y = 0; y < n_states; ++y) tail += row[y] * sol.v[h + 1][y];
      sol.q[h][z] = mdp.mean_reward(h, z) + tail;
    }
    sol.v[h] = sol.q[h].state_values();
  }
  for (int x = 0; x < n_states; ++x) sol.initial_value += mdp.initial()[x] * sol.v[0][x];
  return sol;
}

ConditionalMoments true_conditional(const EpisodicMdp& mdp,
                                    std::span<const double> next_values, int h,
                                    PairIndex z) {
  require(next_values.size() == static_cast<std::size_t>(mdp.num_states()),
          "true_conditional: function must be defined on every state");
  require(h >= 0 && h < mdp.horizon(), "true_conditional: level out of range");
  const auto row = mdp.transition(h, z);
  double mean_next = 0.0;
  for (int y = 0; y < mdp.num_states(); ++y) mean_next += row[y] * next_values[y];
  double var_next = 0.0;
  for (int y = 0; y < mdp.num_states(); ++y) {
    const double dev = next_values[y] - mean_next;
    var_next += row[y] * dev * dev;
  }
  // Reward noise is independent of the successor given z.
  return {mdp.mean_reward(h, z) + mean_next, mdp.reward_variance(h, z) + var_next};
}

double bellman_residual(const EpisodicMdp& mdp, const OptimalSolution& sol) {
  double worst = 0.0;
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (PairIndex z = 0; z < mdp.num_pairs(); ++z) {
      const double backup = true_conditional(mdp, sol.v[h + 1], h, z).mean;
      worst = std::max(worst, std::abs(sol.q[h][z] - backup));
    }
  }
  return worst;
}

double optimal_total_variance(const EpisodicMdp& mdp, const OptimalSolution& sol) {
  // Forward occupancy of the greedy optimal policy.
  std::vector<double> occupancy = mdp.initial();
  double total = 0.0;
  for (int h = 0; h < mdp.horizon(); ++h) {
    std::vector<double> next(mdp.num_states(), 0.0);
    for (int x = 0; x < mdp.num_states(); ++x) {
      if (occupancy[x] == 0.0) continue;
      const PairIndex z = mdp.pair(x, sol.q[h].greedy_action(x));
      total += occupancy[x] * true_conditional(mdp, sol.v[h + 1], h, z).variance;
      const auto row = mdp.transition(h, z);
      for (int y = 0; y < mdp.num_states(); ++y) next[y] += occupancy[x] * row[y];
    }
    occupancy = std::move(next);
  }
  return total;
}

ExplorationValue evaluate_exploration_policy(const EpisodicMdp& mdp,
                                             const std::vector<QFunction>& f1,
                                             const std::vector<QFunction>& f2,
                                             double threshold) {
  const int H = mdp.horizon();
  const int n_states = mdp.num_states();
  require(f1.size() == static_cast<std::size_t>(H) && f2.size() == f1.size(),
          "evaluate_exploration_policy: need one function per level");
  // Index 0: not yet switched. Index 1: switched.
  std::vector<double> stay(n_states, 0.0), switched(n_states, 0.0);
  std::vector<double> flip_prob(n_states, 0.0);
  auto backup = [&](int h, PairIndex z, const std::vector<double>& cont) {
    const auto row = mdp.transition(h, z);
    double tail = 0.0;
    for (int y = 0; y < n_states; ++y) tail += row[y] * cont[y];
    return mdp.mean_reward(h, z) + tail;
  };
  for (int h = H - 1; h >= 0; --h) {
    std::vector<double> new_stay(n_states), new_switched(n_states), new_flip(n_states);
    for (int x = 0; x < n_states; ++x) {
      const PairIndex z2 = mdp.pair(x, f2[h].greedy_action(x));
      new_switched[x] = backup(h, z2, switched);
      const bool keep = f1[h].state_value(x) >= f2[h].state_value(x) - threshold;
      if (keep) {
        const PairIndex z1 = mdp.pair(x, f1[h].greedy_action(x));
        new_stay[x] = backup(h, z1, stay);
        new_flip[x] = backup(h, z1, flip_prob) - mdp.mean_reward(h, z1);
      } else {
        new_stay[x] = new_switched[x];
        new_flip[x] = 1.0;
      }
    }
    stay = std::move(new_stay);
    switched = std::move(new_switched);
    flip_prob = std::move(new_flip);
  }
  ExplorationValue out;
  out.by_state = stay;
  for (int x = 0; x < n_states; ++x) {
    out.initial_value += mdp.initial()[x] * stay[x];
    out.switch_probability += mdp.initial()[x] * flip_prob[x];
  }
  return out;
}

double evaluate_greedy_policy(const EpisodicMdp& mdp, const std::vector<QFunction>& q) {
  return evaluate_exploration_policy(mdp, q, q, kInf).initial_value;
}

double evaluate_uniform_policy(const EpisodicMdp& mdp) {
  std::vector<double> next(mdp.num_states(), 0.0);
  for (int h = mdp.horizon() - 1; h >= 0; --h) {
    std::vector<double> cur(mdp.num_states(), 0.0);
    for (int x = 0; x < mdp.num_states(); ++x) {
      for (int a = 0; a < mdp.num_actions(); ++a) {
        const PairIndex z = mdp.pair(x, a);
        const auto row = mdp.transition(h, z);
        double tail = 0.0;
        for (int y = 0; y < mdp.num_states(); ++y) tail += row[y] * next[y];
        cur[x] += (mdp.mean_reward(h, z) + tail) / mdp.num_actions();
      }
    }
    next = std::move(cur);
  }
  double v = 0.0;
  for (int x = 0; x < mdp.num_states(); ++x) v += mdp.initial()[x] * next[x];
  return v;
}

}  // namespace voql
