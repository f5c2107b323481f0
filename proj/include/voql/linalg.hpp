#pragma once

#include <Eigen/Dense>

#include "voql/common.hpp"

namespace voql {

// Keeps (ridge * I + sum_s c_s v_s v_s^T)^{-1} current under rank-one
// additions via the Sherman-Morrison identity.
class ShermanMorrisonInverse {
 public:
  ShermanMorrisonInverse() = default;
  ShermanMorrisonInverse(int dim, double ridge)
      : inverse_(Eigen::MatrixXd::Identity(dim, dim) / ridge) {
    require(ridge > 0.0, "covariance ridge must be positive");
  }

  // Adds c * v v^T to the underlying matrix.
  void add(const Eigen::VectorXd& v, double c) {
    const Eigen::VectorXd u = inverse_ * v;
    const double denom = 1.0 + c * v.dot(u);
    inverse_.noalias() -= (c / denom) * u * u.transpose();
  }

  // v^T M^{-1} v, clamped at 0 against rounding.
  double quadratic_form(const Eigen::VectorXd& v) const {
    return std::max(0.0, v.dot(inverse_ * v));
  }

  const Eigen::MatrixXd& inverse() const { return inverse_; }
  int dim() const { return static_cast<int>(inverse_.rows()); }

 private:
  Eigen::MatrixXd inverse_;
};

}  // namespace voql
