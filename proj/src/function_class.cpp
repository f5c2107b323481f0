#include "voql/function_class.hpp"

#include <cmath>

namespace voql {
namespace {

constexpr double kNormSlack = 1e-12;

}  // namespace

FunctionClass FunctionClass::finite(int num_states, int num_actions,
                                    std::vector<std::vector<double>> tables,
                                    double range) {
  require(num_states >= 1 && num_actions >= 1, "function class: empty grid");
  require(!tables.empty(), "function class: a class needs at least one member");
  require(range >= 0.0, "function class: range must be non-negative");
  FunctionClass cls;
  cls.kind_ = ClassKind::kFiniteTable;
  cls.num_states_ = num_states;
  cls.num_actions_ = num_actions;
  cls.range_ = range;
  cls.enumerable_ = true;
  const auto n_pairs = static_cast<std::size_t>(num_states) * num_actions;
  cls.table_.reserve(tables.size() * n_pairs);
  for (const auto& t : tables) {
    require(t.size() == n_pairs, "function class: member has the wrong number of pairs");
    for (double v : t) {
      require(std::isfinite(v), "function class: non-finite member value");
      cls.table_.push_back(std::clamp(v, 0.0, range));
    }
  }
  cls.log_size_ = std::log(static_cast<double>(tables.size()));
  return cls;
}

FunctionClass FunctionClass::grid(int num_states, int num_actions, double step,
                                  double range, std::int64_t member_cap) {
  require(step > 0.0 && range >= 0.0, "grid class: need step > 0 and range >= 0");
  const int levels = static_cast<int>(std::floor(range / step + 1e-9)) + 1;
  const int n_pairs = num_states * num_actions;
  const double count = std::pow(static_cast<double>(levels), n_pairs);
  require(count <= static_cast<double>(member_cap),
          "grid class: member count exceeds the configured cap");
  const auto n = static_cast<std::int64_t>(count);
  std::vector<std::vector<double>> tables(n, std::vector<double>(n_pairs));
  for (std::int64_t m = 0; m < n; ++m) {
    std::int64_t rest = m;
    for (int z = 0; z < n_pairs; ++z) {
      tables[m][z] = static_cast<double>(rest % levels) * step;
      rest /= levels;
    }
  }
  return finite(num_states, num_actions, std::move(tables), range);
}

FunctionClass FunctionClass::linear_cover(int num_states, int num_actions,
                                          Eigen::MatrixXd features, double radius,
                                          double eps_c, double range,
                                          const CoverOptions& options) {
  require(eps_c > 0.0, "linear cover: eps_c must be positive");
  require(radius >= 0.0, "linear cover: radius must be non-negative");
  require(features.rows() == num_states * num_actions && features.cols() >= 1,
          "linear cover: feature matrix must have one row per pair");
  require(features.allFinite(), "linear cover: non-finite features");
  FunctionClass cls;
  cls.kind_ = ClassKind::kLinear;
  cls.num_states_ = num_states;
  cls.num_actions_ = num_actions;
  cls.range_ = range;
  cls.radius_ = radius;
  cls.eps_c_ = eps_c;
  cls.features_ = std::move(features);
  const int d = cls.dim();

  // Rounding each coordinate moves w by at most sqrt(d) * s / 2 in norm, which
  // moves <w, phi> by at most that times max |phi|.
  const double max_phi = cls.features_.rowwise().norm().maxCoeff();
  cls.spacing_ = max_phi > 0.0 ? 2.0 * eps_c / (std::sqrt(static_cast<double>(d)) * max_phi)
                               : kInf;
  cls.per_axis_ = (radius == 0.0 || max_phi == 0.0)
                      ? 0
                      : static_cast<int>(std::ceil(radius / cls.spacing_ - 1e-12));
  const double side = 2.0 * cls.per_axis_ + 1.0;
  cls.grid_count_ = std::pow(side, d);
  require(cls.grid_count_ <= options.member_cap,
          "linear cover: eps_c too small, cover exceeds the member cap");
  cls.log_size_ = d * std::log(side);

  // Only grid points that can be the rounding of some ball point are kept.
  const double keep_radius =
      radius + std::sqrt(static_cast<double>(d)) * cls.spacing_ / 2.0 + kNormSlack;
  if (cls.grid_count_ <= 64.0 * static_cast<double>(options.materialize_limit)) {
    std::vector<Eigen::VectorXd> kept;
    const auto total = static_cast<std::int64_t>(cls.grid_count_);
    const auto side_i = static_cast<std::int64_t>(side);
    Eigen::VectorXd g(d);
    for (std::int64_t idx = 0; idx < total; ++idx) {
      std::int64_t rest = idx;
      for (int i = 0; i < d; ++i) {
        g(i) = static_cast<double>(rest % side_i - cls.per_axis_) *
               (cls.per_axis_ == 0 ? 0.0 : cls.spacing_);
        rest /= side_i;
      }
      if (g.norm() <= keep_radius) kept.push_back(g);
      if (static_cast<std::int64_t>(kept.size()) > options.materialize_limit) break;
    }
    if (static_cast<std::int64_t>(kept.size()) <= options.materialize_limit) {
      cls.enumerable_ = true;
      cls.weights_.resize(static_cast<Eigen::Index>(kept.size()), d);
      const int n_pairs = cls.num_pairs();
      cls.table_.resize(kept.size() * n_pairs);
      for (std::size_t m = 0; m < kept.size(); ++m) {
        cls.key_to_member_.emplace(cls.grid_key(kept[m]), static_cast<std::int64_t>(m));
        const Eigen::VectorXd w = cls.project(kept[m]);
        cls.weights_.row(static_cast<Eigen::Index>(m)) = w.transpose();
        const Eigen::VectorXd v = cls.features_ * w;
        for (int z = 0; z < n_pairs; ++z) {
          cls.table_[m * n_pairs + z] = std::clamp(v(z), 0.0, range);
        }
      }
      cls.log_size_ = std::log(static_cast<double>(kept.size()));
    }
  }
  return cls;
}

std::int64_t FunctionClass::size() const {
  if (enumerable_) return static_cast<std::int64_t>(table_.size() / num_pairs());
  return grid_count_ < 9.2e18 ? static_cast<std::int64_t>(grid_count_) : -1;
}

QFunction FunctionClass::member_function(std::int64_t m) const {
  require(enumerable_ && m >= 0 && m < size(), "function class: member index out of range");
  const auto row = member(m);
  return QFunction(num_states_, num_actions_, std::vector<double>(row.begin(), row.end()));
}

Eigen::VectorXd FunctionClass::project(const Eigen::VectorXd& w) const {
  const double n = w.norm();
  if (n <= radius_ || n == 0.0) return w;
  return w * (radius_ / n);
}

std::int64_t FunctionClass::grid_key(const Eigen::VectorXd& g) const {
  const std::int64_t side = 2 * static_cast<std::int64_t>(per_axis_) + 1;
  std::int64_t key = 0;
  for (int i = dim() - 1; i >= 0; --i) {
    const auto c = per_axis_ == 0 ? 0 : static_cast<std::int64_t>(std::llround(g(i) / spacing_));
    key = key * side + (c + per_axis_);
  }
  return key;
}

Eigen::VectorXd FunctionClass::snap(const Eigen::VectorXd& w) const {
  require(kind_ == ClassKind::kLinear, "snap: class is not linear");
  require(w.size() == dim(), "snap: weight dimension mismatch");
  if (per_axis_ == 0) return Eigen::VectorXd::Zero(dim());
  Eigen::VectorXd g = project(w);
  for (int i = 0; i < dim(); ++i) {
    const double c = std::clamp(std::round(g(i) / spacing_), -static_cast<double>(per_axis_),
                                static_cast<double>(per_axis_));
    g(i) = c * spacing_;
  }
  return project(g);
}

std::int64_t FunctionClass::snap_index(const Eigen::VectorXd& w) const {
  require(kind_ == ClassKind::kLinear && enumerable_,
          "snap_index: class is not a materialized cover");
  Eigen::VectorXd g = project(w);
  if (per_axis_ > 0) {
    for (int i = 0; i < dim(); ++i) {
      g(i) = std::clamp(std::round(g(i) / spacing_), -static_cast<double>(per_axis_),
                        static_cast<double>(per_axis_)) *
             spacing_;
    }
  }
  const auto it = key_to_member_.find(grid_key(g));
  if (it == key_to_member_.end()) fail("snap_index: snapped point missing from the cover");
  return it->second;
}

QFunction FunctionClass::evaluate_weights(const Eigen::VectorXd& w) const {
  require(kind_ == ClassKind::kLinear, "evaluate_weights: class is not linear");
  const Eigen::VectorXd v = features_ * w;
  QFunction q(num_states_, num_actions_);
  for (int z = 0; z < num_pairs(); ++z) q[z] = std::clamp(v(z), 0.0, range_);
  return q;
}

double RegressionStats::loss(std::span<const double> f) const {
  double total = constant;
  for (std::size_t z = 0; z < weight.size(); ++z) {
    total += weight[z] * f[z] * f[z] - 2.0 * weighted_target[z] * f[z];
  }
  return total;
}

RegressionStats make_regression_stats(int num_pairs, std::span<const PairIndex> pairs,
                                      std::span<const double> targets,
                                      std::span<const double> sigmas) {
  require(pairs.size() == targets.size() && pairs.size() == sigmas.size(),
          "regression: data, targets and weights differ in length");
  RegressionStats stats(num_pairs);
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    require(pairs[s] >= 0 && pairs[s] < num_pairs, "regression: pair index out of range");
    require(std::isfinite(targets[s]), "regression: non-finite target");
    require(sigmas[s] > 0.0, "regression: weights must be positive");
    stats.add(pairs[s], targets[s], 1.0 / (sigmas[s] * sigmas[s]));
  }
  return stats;
}

Fit regress(const FunctionClass& cls, const RegressionStats& stats,
            RegressionMethod method, double lambda) {
  require(stats.weight.size() == static_cast<std::size_t>(cls.num_pairs()),
          "regression: statistics do not match the class grid");
  if (method == RegressionMethod::kAuto) {
    method = cls.enumerable() ? RegressionMethod::kEnumerate : RegressionMethod::kRidgeSnap;
  }
  Fit fit;
  if (method == RegressionMethod::kEnumerate) {
    require(cls.enumerable(), "regression: class cannot be enumerated");
    const std::int64_t n = cls.size();
    require(n >= 1, "regression: empty class");
    double best = kInf;
    for (std::int64_t m = 0; m < n; ++m) {
      const double l = stats.loss(cls.member(m));
      if (l < best) {
        best = l;
        fit.member = m;
      }
    }
    fit.loss = best;
    fit.values = cls.member_function(fit.member);
    if (cls.kind() == ClassKind::kLinear) {
      fit.weights = cls.cover_weights().row(fit.member).transpose();
    }
    return fit;
  }
  require(cls.kind() == ClassKind::kLinear, "regression: ridge path needs a linear class");
  const int d = cls.dim();
  const auto& phi = cls.features();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  if (cls.radius() > 0.0) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(d, d) *
                           (lambda / (4.0 * cls.radius() * cls.radius()));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    for (int z = 0; z < cls.num_pairs(); ++z) {
      if (stats.weight[z] == 0.0) continue;
      gram.noalias() += stats.weight[z] * phi.row(z).transpose() * phi.row(z);
      rhs.noalias() += stats.weighted_target[z] * phi.row(z).transpose();
    }
    w = gram.ldlt().solve(rhs);
  }
  fit.weights = cls.snap(w);
  fit.values = cls.evaluate_weights(fit.weights);
  fit.loss = stats.loss(fit.values.values());
  if (cls.enumerable()) fit.member = cls.snap_index(w);
  return fit;
}

Fit weighted_regression(const FunctionClass& cls, std::span<const PairIndex> pairs,
                        std::span<const double> targets, std::span<const double> sigmas,
                        RegressionMethod method, double lambda) {
  return regress(cls, make_regression_stats(cls.num_pairs(), pairs, targets, sigmas),
                 method, lambda);
}

QFunction clip_compose(const QFunction& fhat, const QFunction& b, double shift, double lo,
                       double hi) {
  require(lo <= hi, "clip_compose: lower bound exceeds upper bound");
  require(fhat.num_pairs() == b.num_pairs(), "clip_compose: grids differ");
  QFunction out = fhat;
  for (int z = 0; z < out.num_pairs(); ++z) {
    out[z] = std::min(std::max(fhat[z] + b[z] + shift, lo), hi);
  }
  return out;
}

}  // namespace voql
