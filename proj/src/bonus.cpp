#include "voql/bonus.hpp"

#include <cmath>

namespace voql {

std::string to_string(BonusKind kind) {
  switch (kind) {
    case BonusKind::kVersionSpace: return "vs";
    case BonusKind::kElliptical: return "elliptical";
    case BonusKind::kSubsample: return "subsample";
    case BonusKind::kEnvelope: return "envelope";
  }
  return "unknown";
}

OracleKind parse_oracle_kind(const std::string& name) {
  if (name == "vs") return OracleKind::kVersionSpace;
  if (name == "elliptical") return OracleKind::kElliptical;
  if (name == "subsample") return OracleKind::kSubsample;
  fail("unknown bonus oracle '" + name + "' (expected vs, elliptical or subsample)");
}

std::string to_string(OracleKind kind) {
  switch (kind) {
    case OracleKind::kVersionSpace: return "vs";
    case OracleKind::kElliptical: return "elliptical";
    case OracleKind::kSubsample: return "subsample";
  }
  return "unknown";
}

BonusFn vs_bonus(const FunctionClass& cls, std::span<const double> center,
                 std::span<const double> weight, double beta) {
  require(cls.enumerable(), "vs_bonus: class must be enumerable");
  require(beta >= 0.0, "vs_bonus: beta must be non-negative");
  require(center.size() == static_cast<std::size_t>(cls.num_pairs()) &&
              weight.size() == center.size(),
          "vs_bonus: center or weights do not match the class grid");
  const int n_pairs = cls.num_pairs();
  const double radius_sq = beta * beta;
  std::vector<double> b(n_pairs, 0.0);
  std::int64_t members_in_space = 0;
  for (std::int64_t m = 0; m < cls.size(); ++m) {
    const auto f = cls.member(m);
    double dist = 0.0;
    for (int z = 0; z < n_pairs && dist <= radius_sq; ++z) {
      const double diff = f[z] - center[z];
      dist += weight[z] * diff * diff;
    }
    if (dist > radius_sq) continue;
    ++members_in_space;
    for (int z = 0; z < n_pairs; ++z) b[z] = std::max(b[z], std::abs(f[z] - center[z]));
  }
  BonusFn out;
  out.values = QFunction(cls.num_states(), cls.num_actions(), std::move(b));
  out.kind = BonusKind::kVersionSpace;
  out.beta = beta;
  out.descriptor = {{"kind", "vs"},
                    {"beta", beta},
                    {"members_in_space", members_in_space},
                    {"center", std::vector<double>(center.begin(), center.end())},
                    {"weight", std::vector<double>(weight.begin(), weight.end())}};
  return out;
}

BonusFn vs_bonus(const FunctionClass& cls, std::span<const double> center,
                 std::span<const PairIndex> pairs, std::span<const double> sigmas,
                 double beta) {
  require(pairs.size() == sigmas.size(), "vs_bonus: data and weights differ in length");
  std::vector<double> weight(cls.num_pairs(), 0.0);
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    require(sigmas[s] > 0.0, "vs_bonus: weights must be positive");
    weight[pairs[s]] += 1.0 / (sigmas[s] * sigmas[s]);
  }
  return vs_bonus(cls, center, weight, beta);
}

EllipticalBuilder::EllipticalBuilder(Eigen::MatrixXd features, double ridge)
    : features_(std::move(features)) {
  require(features_.allFinite(), "elliptical bonus: non-finite features");
  inv_ = ShermanMorrisonInverse(static_cast<int>(features_.cols()), ridge);
}

void EllipticalBuilder::append(PairIndex z, double sigma) {
  require(sigma > 0.0, "elliptical bonus: weights must be positive");
  inv_.add(features_.row(z).transpose(), 1.0 / (sigma * sigma));
}

double EllipticalBuilder::norm(PairIndex z) const {
  return std::sqrt(inv_.quadratic_form(features_.row(z).transpose()));
}

BonusFn EllipticalBuilder::bonus(double scale, double beta, int t, int h, int num_states,
                                 int num_actions) const {
  QFunction b(num_states, num_actions);
  require(b.num_pairs() == features_.rows(), "elliptical bonus: grid mismatch");
  for (int z = 0; z < b.num_pairs(); ++z) b[z] = scale * norm(z);
  BonusFn out;
  out.values = std::move(b);
  out.kind = BonusKind::kElliptical;
  out.t = t;
  out.h = h;
  out.beta = beta;
  const auto& inv = inv_.inverse();
  out.descriptor = {{"kind", "elliptical"},
                    {"scale", scale},
                    {"beta", beta},
                    {"inverse", std::vector<double>(inv.data(), inv.data() + inv.size())}};
  return out;
}

BonusFn elliptical_bonus(const Eigen::MatrixXd& features, int num_states, int num_actions,
                         std::span<const PairIndex> pairs, std::span<const double> sigmas,
                         double beta, double lambda, double radius) {
  require(lambda > 0.0 && radius > 0.0, "elliptical bonus: need lambda > 0 and B > 0");
  require(pairs.size() == sigmas.size(), "elliptical bonus: data and weights differ in length");
  EllipticalBuilder builder(features, lambda / (4.0 * radius * radius));
  for (std::size_t s = 0; s < pairs.size(); ++s) builder.append(pairs[s], sigmas[s]);
  return builder.bonus(std::sqrt(beta * beta + lambda), beta, 0, 0, num_states, num_actions);
}

void SubsampledSet::add(PairIndex z, double sigma_bar, int multiplicity) {
  require(multiplicity >= 1, "subsampled set: multiplicity must be a positive integer");
  entries_.push_back({z, sigma_bar, multiplicity});
  weight_[z] += multiplicity / (sigma_bar * sigma_bar);
}

double SensitivityParams::log_term(double log_class_size) const {
  return std::log(static_cast<double>(T)) + log_class_size - std::log(delta);
}

double SensitivityParams::truncation() const {
  return static_cast<double>(T) * (H + 1.0) * (H + 1.0) / (alpha * alpha);
}

double sampling_probability(double threshold) {
  if (!(threshold > 0.0)) return 0.0;
  if (threshold >= 1.0) return 1.0;
  return 1.0 / std::floor(1.0 / threshold);
}

int subsample_size_bound(const SensitivityParams& params, double log_class_size, double dim) {
  return static_cast<int>(
      std::ceil(4.0 * params.C * params.log_term(log_class_size) * std::max(dim, 1.0)));
}

SubsampleBuilder::SubsampleBuilder(const FunctionClass& cls)
    : cls_(&cls), cache_(cls), set_(cls.num_pairs()) {}

double SubsampleBuilder::score(PairIndex z, double sigma_bar,
                               const SensitivityParams& params) const {
  const double ratio =
      cache_.sup_ratio(z, params.beta * params.beta, params.truncation()) /
      (sigma_bar * sigma_bar);
  return std::min(ratio, 1.0);
}

bool SubsampleBuilder::update(PairIndex z, double sigma_bar, const SensitivityParams& params,
                              Rng& rng) {
  require(sigma_bar >= params.alpha * (1.0 - 1e-12),
          "sensitivity sampling: weight below the floor alpha");
  const double threshold =
      std::min(1.0, params.C * score(z, sigma_bar, params) * params.log_term(cls_->log_size()));
  const double p = sampling_probability(threshold);
  // The coin is always drawn so the random stream does not depend on p.
  const double u = rng.uniform();
  if (p == 0.0 || u >= p) return false;
  const int copies = static_cast<int>(std::lround(1.0 / p));
  set_.add(z, sigma_bar, copies);
  cache_.add(z, copies / (sigma_bar * sigma_bar));
  return true;
}

bool sensitivity_update(SubsampleBuilder& builder, PairIndex z, double sigma_bar,
                        const SensitivityParams& params, Rng& rng) {
  return builder.update(z, sigma_bar, params, rng);
}

BonusFn subsample_bonus(const SubsampledSet& set, const FunctionClass& cls,
                        std::span<const double> center, double beta) {
  BonusFn out = vs_bonus(cls, center, set.aggregated_weight(), 10.0 * beta);
  out.kind = BonusKind::kSubsample;
  out.beta = beta;
  out.descriptor["kind"] = "subsample";
  out.descriptor["beta"] = beta;
  out.descriptor["distinct_count"] = set.distinct_count();
  return out;
}

EnvelopeResult enforce_consistency(const BonusFn& current, const BonusFn& previous) {
  require(current.values.num_pairs() == previous.values.num_pairs(),
          "enforce_consistency: bonus grids differ");
  EnvelopeResult res;
  res.bonus = current;
  res.bonus.kind = BonusKind::kEnvelope;
  for (int z = 0; z < current.values.num_pairs(); ++z) {
    if (current.values[z] > previous.values[z]) {
      ++res.raw_violations;
      res.bonus.values[z] = previous.values[z];
    }
  }
  res.bonus.descriptor = {{"kind", "envelope"},
                          {"inner", to_string(current.kind)},
                          {"t", current.t},
                          {"previous_t", previous.t},
                          {"raw_violations", res.raw_violations}};
  return res;
}

namespace {

class VersionSpaceOracle final : public BonusOracle {
 public:
  explicit VersionSpaceOracle(const FunctionClass& cls)
      : cls_(&cls), weight_(cls.num_pairs(), 0.0) {
    require(cls.enumerable(), "vs oracle: class must be enumerable");
  }
  void append(PairIndex z, double sigma, const SensitivityParams&, Rng&) override {
    weight_[z] += 1.0 / (sigma * sigma);
  }
  BonusFn bonus(const QFunction& center, double beta, int t, int h) const override {
    BonusFn b = vs_bonus(*cls_, center.values(), weight_, beta);
    b.t = t;
    b.h = h;
    return b;
  }
  BonusKind kind() const override { return BonusKind::kVersionSpace; }

 private:
  const FunctionClass* cls_;
  std::vector<double> weight_;
};

class EllipticalOracle final : public BonusOracle {
 public:
  EllipticalOracle(const FunctionClass& cls, double lambda)
      : cls_(&cls),
        lambda_(lambda),
        builder_(cls.features(), lambda / (4.0 * std::max(cls.radius(), 1e-300) *
                                           std::max(cls.radius(), 1e-300))) {
    require(cls.kind() == ClassKind::kLinear, "elliptical oracle: class must be linear");
    require(cls.radius() > 0.0, "elliptical oracle: class radius must be positive");
  }
  void append(PairIndex z, double sigma, const SensitivityParams&, Rng&) override {
    builder_.append(z, sigma);
  }
  BonusFn bonus(const QFunction&, double beta, int t, int h) const override {
    return builder_.bonus(std::sqrt(beta * beta + lambda_), beta, t, h, cls_->num_states(),
                          cls_->num_actions());
  }
  BonusKind kind() const override { return BonusKind::kElliptical; }

 private:
  const FunctionClass* cls_;
  double lambda_;
  EllipticalBuilder builder_;
};

class SubsampleOracle final : public BonusOracle {
 public:
  explicit SubsampleOracle(const FunctionClass& cls) : builder_(cls) {}
  void append(PairIndex z, double sigma, const SensitivityParams& params, Rng& rng) override {
    builder_.update(z, sigma, params, rng);
  }
  BonusFn bonus(const QFunction& center, double beta, int t, int h) const override {
    BonusFn b = subsample_bonus(builder_.set(), builder_.function_class(), center.values(), beta);
    b.t = t;
    b.h = h;
    return b;
  }
  BonusKind kind() const override { return BonusKind::kSubsample; }
  int distinct_count() const override { return builder_.set().distinct_count(); }

 private:
  SubsampleBuilder builder_;
};

}  // namespace

std::unique_ptr<BonusOracle> make_bonus_oracle(OracleKind kind, const FunctionClass& cls,
                                               double lambda) {
  switch (kind) {
    case OracleKind::kVersionSpace: return std::make_unique<VersionSpaceOracle>(cls);
    case OracleKind::kElliptical: return std::make_unique<EllipticalOracle>(cls, lambda);
    case OracleKind::kSubsample: return std::make_unique<SubsampleOracle>(cls);
  }
  fail("unknown bonus oracle");
}

}  // namespace voql
