#pragma once

// The weighted uncertainty D^2 of a query pair given a weighted history, and
// the generalized Eluder dimension accumulated along a sequence.

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "voql/common.hpp"
#include "voql/function_class.hpp"
#include "voql/linalg.hpp"

namespace voql {

// Running per-pair weighted squared distances of an enumerable class:
// den(f, g) = sum_s c_s (f(z_s) - g(z_s))^2. Pairs are unordered, so f < g.
class PairDistanceCache {
 public:
  static constexpr std::int64_t kDefaultPairLimit = 10'000'000;

  PairDistanceCache(const FunctionClass& cls, std::int64_t pair_limit = kDefaultPairLimit);

  // Adds c * (f(z) - g(z))^2 to every pair.
  void add(PairIndex z, double c);

  // sup over pairs of scale * (f(z) - g(z))^2 / (min(den, cap) + reg); 0 for
  // a single-member class.
  double sup_ratio(PairIndex z, double reg, double cap = kInf) const;

  std::int64_t num_members() const { return n_; }
  bool cached() const { return cached_; }

 private:
  double den(std::int64_t f, std::int64_t g) const;

  const FunctionClass* cls_;
  std::int64_t n_;
  bool cached_;
  std::vector<double> pair_den_;     // upper triangle, row-major
  std::vector<double> pair_weight_;  // per z fallback when not cached
};

class UncertaintyContext {
 public:
  explicit UncertaintyContext(double lambda) : lambda_(lambda) {
    require(lambda > 0.0, "uncertainty: lambda must be positive");
  }
  virtual ~UncertaintyContext() = default;

  // D^2(z; history) >= 0.
  virtual double dsq(PairIndex z) const = 0;
  void append(PairIndex z, double sigma) {
    require(sigma > 0.0, "uncertainty: history weights must be positive");
    history_.emplace_back(z, sigma);
    on_append(z, sigma);
  }
  virtual std::unique_ptr<UncertaintyContext> clone() const = 0;
  // True when the class has fewer than two members, so D^2 is identically 0.
  virtual bool degenerate() const { return false; }

  double lambda() const { return lambda_; }
  const std::vector<std::pair<PairIndex, double>>& history() const { return history_; }

 protected:
  virtual void on_append(PairIndex z, double sigma) = 0;

 private:
  double lambda_;
  std::vector<std::pair<PairIndex, double>> history_;
};

// Exact sup over member pairs for enumerable classes.
class FiniteUncertainty final : public UncertaintyContext {
 public:
  FiniteUncertainty(const FunctionClass& cls, double lambda);
  double dsq(PairIndex z) const override;
  std::unique_ptr<UncertaintyContext> clone() const override;
  bool degenerate() const override { return cache_.num_members() < 2; }

 protected:
  void on_append(PairIndex z, double sigma) override;

 private:
  PairDistanceCache cache_;
};

enum class LinearDsqForm {
  // (2 |phi|_{Sigma^-1})^2, the factor-2 surrogate.
  kSurrogate,
  // |phi|^2_{Sigma^-1}, which equals the sup over the unclipped radius-B ball.
  kExact,
};

// Elliptical form for linear classes with
// Sigma = lambda / (4 B^2) I + sum_s phi_s phi_s^T / sigma_s^2.
class EllipticalUncertainty final : public UncertaintyContext {
 public:
  EllipticalUncertainty(Eigen::MatrixXd features, double radius, double lambda,
                        LinearDsqForm form = LinearDsqForm::kSurrogate);
  double dsq(PairIndex z) const override;
  std::unique_ptr<UncertaintyContext> clone() const override;
  const ShermanMorrisonInverse& covariance_inverse() const { return inv_; }

 protected:
  void on_append(PairIndex z, double sigma) override;

 private:
  Eigen::MatrixXd features_;
  ShermanMorrisonInverse inv_;
  double factor_;
};

// Picks the elliptical form for unmaterialized linear classes and the exact
// pair sup otherwise.
std::unique_ptr<UncertaintyContext> make_uncertainty(
    const FunctionClass& cls, double lambda,
    LinearDsqForm form = LinearDsqForm::kSurrogate, bool prefer_elliptical = true);

// sum_i min(1, D^2(z_i; z_{<i}, sigma_{<i}) / sigma_i^2), starting from the
// history already held by `ctx` (which is left untouched).
double gen_eluder_dim(const UncertaintyContext& ctx, std::span<const PairIndex> zs,
                      std::span<const double> sigmas);

}  // namespace voql
