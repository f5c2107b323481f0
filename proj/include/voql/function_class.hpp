#pragma once

// Per-level hypothesis classes over the finite (state, action) grid, their
// covers, and the least-squares regression oracles used by the learner.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "voql/common.hpp"

namespace voql {

enum class ClassKind { kFiniteTable, kLinear };

struct CoverOptions {
  // Covers with at most this many members are materialized as tables and can
  // be enumerated exactly.
  std::int64_t materialize_limit = 100000;
  // Hard ceiling on the raw grid size; exceeding it is a configuration error.
  double member_cap = 1e15;
};

class FunctionClass {
 public:
  // Every table is clipped into [0, range] on construction.
  static FunctionClass finite(int num_states, int num_actions,
                              std::vector<std::vector<double>> tables,
                              double range);

  // All tables whose entries are multiples of `step` in [0, range].
  static FunctionClass grid(int num_states, int num_actions, double step,
                            double range, std::int64_t member_cap = 1000000);

  // Clipped linear functions clip(<w, phi(z)>, 0, range) with |w| <= radius,
  // discretized by an axis grid whose sup-norm error over the given feature
  // rows is at most eps_c. `features` has one row per pair.
  static FunctionClass linear_cover(int num_states, int num_actions,
                                    Eigen::MatrixXd features, double radius,
                                    double eps_c, double range,
                                    const CoverOptions& options = {});

  ClassKind kind() const { return kind_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int num_pairs() const { return num_states_ * num_actions_; }
  double range() const { return range_; }

  // True when members are stored as tables (finite classes, small covers).
  bool enumerable() const { return enumerable_; }
  std::int64_t size() const;
  // log of the member count; for unmaterialized covers this is the grid count.
  double log_size() const { return log_size_; }

  std::span<const double> member(std::int64_t m) const {
    return std::span<const double>(table_).subspan(
        static_cast<std::size_t>(m) * num_pairs(), num_pairs());
  }
  double value(std::int64_t m, PairIndex z) const {
    return table_[static_cast<std::size_t>(m) * num_pairs() + z];
  }
  QFunction member_function(std::int64_t m) const;

  // Linear classes only.
  int dim() const { return static_cast<int>(features_.cols()); }
  const Eigen::MatrixXd& features() const { return features_; }
  double radius() const { return radius_; }
  double eps_c() const { return eps_c_; }
  double spacing() const { return spacing_; }
  int per_axis() const { return per_axis_; }
  double grid_count() const { return grid_count_; }
  const Eigen::MatrixXd& cover_weights() const { return weights_; }
  // Nearest cover point (project, round to grid, project) of an arbitrary w.
  Eigen::VectorXd snap(const Eigen::VectorXd& w) const;
  // Member index of snap(w); only for materialized covers.
  std::int64_t snap_index(const Eigen::VectorXd& w) const;
  QFunction evaluate_weights(const Eigen::VectorXd& w) const;

 private:
  FunctionClass() = default;
  Eigen::VectorXd project(const Eigen::VectorXd& w) const;
  std::int64_t grid_key(const Eigen::VectorXd& w) const;

  ClassKind kind_ = ClassKind::kFiniteTable;
  int num_states_ = 0;
  int num_actions_ = 0;
  double range_ = 0.0;
  bool enumerable_ = false;
  double log_size_ = 0.0;
  std::vector<double> table_;

  Eigen::MatrixXd features_;
  double radius_ = 0.0;
  double eps_c_ = 0.0;
  double spacing_ = 0.0;
  int per_axis_ = 0;
  double grid_count_ = 1.0;
  Eigen::MatrixXd weights_;
  std::unordered_map<std::int64_t, std::int64_t> key_to_member_;
};

// Aggregated least-squares data: with w_s the per-sample weight,
// weight[z] = sum w_s, weighted_target[z] = sum w_s y_s over samples at z, and
// constant = sum w_s y_s^2 (0 when unknown). The loss of f is then
// sum_z weight[z] f(z)^2 - 2 weighted_target[z] f(z) + constant.
struct RegressionStats {
  explicit RegressionStats(int num_pairs = 0)
      : weight(num_pairs, 0.0), weighted_target(num_pairs, 0.0) {}

  void add(PairIndex z, double target, double w) {
    weight[z] += w;
    weighted_target[z] += w * target;
    constant += w * target * target;
  }
  double loss(std::span<const double> f) const;

  std::vector<double> weight;
  std::vector<double> weighted_target;
  double constant = 0.0;
};

// Loss = sum_s (f(z_s) - y_s)^2 / sigma_s^2.
RegressionStats make_regression_stats(int num_pairs, std::span<const PairIndex> pairs,
                                      std::span<const double> targets,
                                      std::span<const double> sigmas);

enum class RegressionMethod { kAuto, kEnumerate, kRidgeSnap };

struct Fit {
  std::int64_t member = -1;  // index in an enumerable class, else -1
  QFunction values;
  double loss = 0.0;
  Eigen::VectorXd weights;   // linear classes only
};

// Least-squares fit over the class; ties go to the lowest member index.
// kAuto enumerates whenever the class is enumerable. The ridge path solves
// the regularized problem with ridge lambda / (4 B^2), projects onto the
// ball and snaps to the cover.
Fit regress(const FunctionClass& cls, const RegressionStats& stats,
            RegressionMethod method = RegressionMethod::kAuto,
            double lambda = 1.0);

Fit weighted_regression(const FunctionClass& cls, std::span<const PairIndex> pairs,
                        std::span<const double> targets,
                        std::span<const double> sigmas,
                        RegressionMethod method = RegressionMethod::kAuto,
                        double lambda = 1.0);

// Pointwise min(max(fhat + b + shift, lo), hi).
QFunction clip_compose(const QFunction& fhat, const QFunction& b, double shift,
                       double lo, double hi);

}  // namespace voql
