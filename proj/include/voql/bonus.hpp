#pragma once

// Bonus oracles: functions b >= 0 over the pair grid that upper-bound how far
// any member of the current confidence set can stray from the regression
// center. Three constructions plus the running-min consistency envelope.

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "voql/common.hpp"
#include "voql/eluder.hpp"
#include "voql/function_class.hpp"
#include "voql/linalg.hpp"

namespace voql {

enum class BonusKind { kVersionSpace, kElliptical, kSubsample, kEnvelope };

std::string to_string(BonusKind kind);

struct BonusFn {
  QFunction values;
  BonusKind kind = BonusKind::kVersionSpace;
  int t = 0;
  int h = 0;
  double beta = 0.0;
  // Compact parameterization that determines `values`.
  nlohmann::json descriptor;

  double operator()(PairIndex z) const { return values[z]; }
};

// max over members f with sum_z weight[z] (f(z) - center(z))^2 <= beta^2 of
// |f(z) - center(z)|, by enumeration. `weight[z]` aggregates 1/sigma^2 over the
// data at z.
BonusFn vs_bonus(const FunctionClass& cls, std::span<const double> center,
                 std::span<const double> weight, double beta);

// Same, from an explicit (z_s, sigma_s) history.
BonusFn vs_bonus(const FunctionClass& cls, std::span<const double> center,
                 std::span<const PairIndex> pairs, std::span<const double> sigmas,
                 double beta);

// Running covariance ridge * I + sum_s phi_s phi_s^T / sigma_s^2 with bonuses
// b(z) = scale * |phi(z)|_{Sigma^-1}.
class EllipticalBuilder {
 public:
  EllipticalBuilder(Eigen::MatrixXd features, double ridge);
  void append(PairIndex z, double sigma);
  double norm(PairIndex z) const;
  BonusFn bonus(double scale, double beta, int t, int h, int num_states, int num_actions) const;
  const ShermanMorrisonInverse& inverse() const { return inv_; }
  const Eigen::MatrixXd& features() const { return features_; }

 private:
  Eigen::MatrixXd features_;
  ShermanMorrisonInverse inv_;
};

// b(z) = |phi(z)|_{Sigma^-1} sqrt(beta^2 + lambda) with
// Sigma = lambda / (4 B^2) I + sum_s phi_s phi_s^T / sigma_s^2.
BonusFn elliptical_bonus(const Eigen::MatrixXd& features, int num_states, int num_actions,
                         std::span<const PairIndex> pairs, std::span<const double> sigmas,
                         double beta, double lambda, double radius);

struct SubsampleEntry {
  PairIndex z;
  double sigma_bar;
  int multiplicity;
};

// The weighted multiset built by sensitivity sampling.
class SubsampledSet {
 public:
  explicit SubsampledSet(int num_pairs = 0) : weight_(num_pairs, 0.0) {}
  void add(PairIndex z, double sigma_bar, int multiplicity);
  const std::vector<SubsampleEntry>& entries() const { return entries_; }
  // Number of accepted entries, each carrying its multiplicity.
  int distinct_count() const { return static_cast<int>(entries_.size()); }
  // sum over entries at z of multiplicity / sigma_bar^2.
  const std::vector<double>& aggregated_weight() const { return weight_; }

 private:
  std::vector<SubsampleEntry> entries_;
  std::vector<double> weight_;
};

struct SensitivityParams {
  double beta = 1.0;
  double alpha = 1.0;
  double C = 1.0;
  double delta = 0.01;
  int T = 1;
  int H = 1;

  // log(T N / delta) for a class of N members.
  double log_term(double log_class_size) const;
  // Truncation T (H + 1)^2 / alpha^2 of the subsampled norm.
  double truncation() const;
};

// Smallest p >= threshold with 1/p a positive integer; 0 when threshold <= 0.
double sampling_probability(double threshold);

// ceil(4 C log(T N / delta) max(dim, 1)).
int subsample_size_bound(const SensitivityParams& params, double log_class_size, double dim);

class SubsampleBuilder {
 public:
  SubsampleBuilder(const FunctionClass& cls);
  // Weighted sensitivity of (z, sigma_bar) against the current set.
  double score(PairIndex z, double sigma_bar, const SensitivityParams& params) const;
  // One online step; returns true when the point entered the set.
  bool update(PairIndex z, double sigma_bar, const SensitivityParams& params, Rng& rng);
  const SubsampledSet& set() const { return set_; }
  const FunctionClass& function_class() const { return *cls_; }

 private:
  const FunctionClass* cls_;
  PairDistanceCache cache_;
  SubsampledSet set_;
};

bool sensitivity_update(SubsampleBuilder& builder, PairIndex z, double sigma_bar,
                        const SensitivityParams& params, Rng& rng);

// Version-space bonus on the subsampled norm with radius 10 beta; an empty set
// admits every member.
BonusFn subsample_bonus(const SubsampledSet& set, const FunctionClass& cls,
                        std::span<const double> center, double beta);

struct EnvelopeResult {
  BonusFn bonus;
  int raw_violations = 0;  // pairs where current exceeded previous
};

// Pointwise min(current, previous).
EnvelopeResult enforce_consistency(const BonusFn& current, const BonusFn& previous);

// Stateful per-level bonus source used by the learner. `append` grows the
// data with the weight the channel uses; `bonus` produces b for a center.
class BonusOracle {
 public:
  virtual ~BonusOracle() = default;
  virtual void append(PairIndex z, double sigma, const SensitivityParams& params, Rng& rng) = 0;
  virtual BonusFn bonus(const QFunction& center, double beta, int t, int h) const = 0;
  virtual BonusKind kind() const = 0;
  // Entries held by a subsampled set; -1 for other oracles.
  virtual int distinct_count() const { return -1; }
};

enum class OracleKind { kVersionSpace, kElliptical, kSubsample };

OracleKind parse_oracle_kind(const std::string& name);
std::string to_string(OracleKind kind);

std::unique_ptr<BonusOracle> make_bonus_oracle(OracleKind kind, const FunctionClass& cls,
                                               double lambda);

}  // namespace voql
