#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace voql {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kParse = 3,
  kInvariantBreach = 4,
  kInternal = 5,
};

// All library failures surface as this exception; the C layer maps `code()`
// onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(what);
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Flat index of a state-action pair.
using PairIndex = int;

// SplitMix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return unit_(engine_); }

  int uniform_int(int n) {
    return std::uniform_int_distribution<int>(0, n - 1)(engine_);
  }

  // Draws an index from an (unnormalized-safe) probability vector.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    int last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      acc += probs[i];
      last_positive = static_cast<int>(i);
      if (u < acc) return last_positive;
    }
    return last_positive;
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

// A real function over the finite (state, action) grid of one level.
class QFunction {
 public:
  QFunction() = default;
  QFunction(int num_states, int num_actions, double fill = 0.0)
      : num_states_(num_states),
        num_actions_(num_actions),
        values_(static_cast<std::size_t>(num_states) * num_actions, fill) {}
  QFunction(int num_states, int num_actions, std::vector<double> values)
      : num_states_(num_states),
        num_actions_(num_actions),
        values_(std::move(values)) {
    require(values_.size() ==
                static_cast<std::size_t>(num_states) * num_actions,
            "QFunction: value count does not match the state-action grid");
  }

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int num_pairs() const { return static_cast<int>(values_.size()); }

  double operator[](PairIndex z) const { return values_[z]; }
  double& operator[](PairIndex z) { return values_[z]; }
  double operator()(int x, int a) const { return values_[x * num_actions_ + a]; }

  double state_value(int x) const {
    double best = -kInf;
    for (int a = 0; a < num_actions_; ++a) best = std::max(best, (*this)(x, a));
    return best;
  }

  // Lowest-index argmax.
  int greedy_action(int x) const {
    int best = 0;
    for (int a = 1; a < num_actions_; ++a) {
      if ((*this)(x, a) > (*this)(x, best)) best = a;
    }
    return best;
  }

  std::vector<double> state_values() const {
    std::vector<double> v(num_states_);
    for (int x = 0; x < num_states_; ++x) v[x] = state_value(x);
    return v;
  }

  std::span<const double> values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  bool operator==(const QFunction&) const = default;

 private:
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> values_;
};

}  // namespace voql
