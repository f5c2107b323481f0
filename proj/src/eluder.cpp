#include "voql/eluder.hpp"

#include <cmath>

namespace voql {

PairDistanceCache::PairDistanceCache(const FunctionClass& cls, std::int64_t pair_limit)
    : cls_(&cls), n_(cls.size()) {
  require(cls.enumerable(), "pair cache: class must be enumerable");
  const double pairs = 0.5 * static_cast<double>(n_) * static_cast<double>(n_ - 1);
  cached_ = pairs <= static_cast<double>(pair_limit);
  if (cached_) {
    pair_den_.assign(static_cast<std::size_t>(pairs), 0.0);
  } else {
    pair_weight_.assign(cls.num_pairs(), 0.0);
  }
}

void PairDistanceCache::add(PairIndex z, double c) {
  if (!cached_) {
    pair_weight_[z] += c;
    return;
  }
  std::size_t k = 0;
  for (std::int64_t f = 0; f < n_; ++f) {
    const double vf = cls_->value(f, z);
    for (std::int64_t g = f + 1; g < n_; ++g, ++k) {
      const double diff = vf - cls_->value(g, z);
      pair_den_[k] += c * diff * diff;
    }
  }
}

double PairDistanceCache::den(std::int64_t f, std::int64_t g) const {
  double total = 0.0;
  const auto a = cls_->member(f);
  const auto b = cls_->member(g);
  for (std::size_t z = 0; z < pair_weight_.size(); ++z) {
    if (pair_weight_[z] == 0.0) continue;
    const double diff = a[z] - b[z];
    total += pair_weight_[z] * diff * diff;
  }
  return total;
}

double PairDistanceCache::sup_ratio(PairIndex z, double reg, double cap) const {
  double best = 0.0;
  std::size_t k = 0;
  for (std::int64_t f = 0; f < n_; ++f) {
    const double vf = cls_->value(f, z);
    for (std::int64_t g = f + 1; g < n_; ++g, ++k) {
      const double diff = vf - cls_->value(g, z);
      const double num = diff * diff;
      if (num <= best * reg) continue;  // cannot beat the incumbent
      const double d = cached_ ? pair_den_[k] : den(f, g);
      best = std::max(best, num / (std::min(d, cap) + reg));
    }
  }
  return best;
}

FiniteUncertainty::FiniteUncertainty(const FunctionClass& cls, double lambda)
    : UncertaintyContext(lambda), cache_(cls) {}

double FiniteUncertainty::dsq(PairIndex z) const { return cache_.sup_ratio(z, lambda()); }

void FiniteUncertainty::on_append(PairIndex z, double sigma) {
  cache_.add(z, 1.0 / (sigma * sigma));
}

std::unique_ptr<UncertaintyContext> FiniteUncertainty::clone() const {
  return std::make_unique<FiniteUncertainty>(*this);
}

EllipticalUncertainty::EllipticalUncertainty(Eigen::MatrixXd features, double radius,
                                             double lambda, LinearDsqForm form)
    : UncertaintyContext(lambda),
      features_(std::move(features)),
      factor_(form == LinearDsqForm::kSurrogate ? 4.0 : 1.0) {
  require(radius > 0.0, "elliptical uncertainty: radius must be positive");
  require(features_.allFinite(), "elliptical uncertainty: non-finite features");
  inv_ = ShermanMorrisonInverse(static_cast<int>(features_.cols()),
                                lambda / (4.0 * radius * radius));
}

double EllipticalUncertainty::dsq(PairIndex z) const {
  return factor_ * inv_.quadratic_form(features_.row(z).transpose());
}

void EllipticalUncertainty::on_append(PairIndex z, double sigma) {
  inv_.add(features_.row(z).transpose(), 1.0 / (sigma * sigma));
}

std::unique_ptr<UncertaintyContext> EllipticalUncertainty::clone() const {
  return std::make_unique<EllipticalUncertainty>(*this);
}

std::unique_ptr<UncertaintyContext> make_uncertainty(const FunctionClass& cls, double lambda,
                                                     LinearDsqForm form,
                                                     bool prefer_elliptical) {
  if (cls.kind() == ClassKind::kLinear && (prefer_elliptical || !cls.enumerable())) {
    // A zero-radius ball holds one function, so nothing is uncertain.
    if (cls.radius() == 0.0) return std::make_unique<FiniteUncertainty>(cls, lambda);
    return std::make_unique<EllipticalUncertainty>(cls.features(), cls.radius(), lambda, form);
  }
  return std::make_unique<FiniteUncertainty>(cls, lambda);
}

double gen_eluder_dim(const UncertaintyContext& ctx, std::span<const PairIndex> zs,
                      std::span<const double> sigmas) {
  require(zs.size() == sigmas.size(), "gen_eluder_dim: sequences differ in length");
  auto work = ctx.clone();
  double total = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double s2 = sigmas[i] * sigmas[i];
    total += std::min(1.0, work->dsq(zs[i]) / s2);
    work->append(zs[i], sigmas[i]);
  }
  return total;
}

}  // namespace voql
