#include "doctest.h"
#include "oracles.hpp"
#include "voql/env.hpp"
#include "voql/function_class.hpp"

using namespace voql;

namespace {

Eigen::MatrixXd random_features(int rows, int d, Rng& rng) {
  Eigen::MatrixXd phi(rows, d);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < d; ++j) phi(i, j) = rng.uniform() * 2.0 - 1.0;
    phi.row(i) /= std::max(1.0, phi.row(i).norm());
  }
  return phi;
}

Eigen::VectorXd random_ball_point(int d, double radius, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd w(d);
  for (int j = 0; j < d; ++j) w(j) = n(rng.engine());
  const double r = radius * std::pow(rng.uniform(), 1.0 / d);
  return w.normalized() * r;
}

double rms_loss(const FunctionClass& cls, std::int64_t m, const std::vector<PairIndex>& zs,
                const std::vector<double>& ys, const std::vector<double>& sig) {
  double loss = 0.0;
  for (std::size_t s = 0; s < zs.size(); ++s) {
    const double d = cls.value(m, zs[s]) - ys[s];
    loss += d * d / (sig[s] * sig[s]);
  }
  return loss;
}

}  // namespace

TEST_CASE("weighted regression examples") {
  const FunctionClass cls = FunctionClass::finite(1, 1, {{0.0}, {1.0}, {0.5}}, 1.0);
  const std::vector<PairIndex> zs = {0, 0};
  const std::vector<double> ys = {1.0, 0.0};
  Fit a = weighted_regression(cls, zs, ys, std::vector<double>{1.0, 1.0});
  CHECK(a.member == 2);
  CHECK(a.loss == doctest::Approx(0.5));
  // Weight 2 on the second point means sigma = 1/sqrt(2).
  Fit b = weighted_regression(cls, zs, ys, std::vector<double>{1.0, std::sqrt(0.5)});
  CHECK(b.member == 2);
  CHECK(b.loss == doctest::Approx(0.75));
  Fit empty = weighted_regression(cls, {}, {}, {});
  CHECK(empty.member == 0);
  CHECK_THROWS_AS(weighted_regression(cls, zs, ys, std::vector<double>{1.0}), Error);
}

TEST_CASE("finite classes clip into range") {
  const FunctionClass cls = FunctionClass::finite(1, 2, {{-1.0, 3.0}}, 2.0);
  CHECK(cls.value(0, 0) == 0.0);
  CHECK(cls.value(0, 1) == 2.0);
  CHECK_THROWS_AS(FunctionClass::finite(1, 2, {}, 1.0), Error);
}

TEST_CASE("clip_compose examples") {
  const QFunction f(1, 1, 0.9), b(1, 1, 0.3), zero(1, 1, 0.0);
  CHECK(clip_compose(f, b, 0.0, 0.0, 1.0)[0] == doctest::Approx(1.0));
  CHECK(clip_compose(QFunction(1, 1, 0.2), zero, 0.0, 0.0, 1.0)[0] == doctest::Approx(0.2));
  CHECK(clip_compose(QFunction(1, 1, 0.1), QFunction(1, 1, 0.05), -0.3, 0.0, 1.0)[0] == 0.0);
}

TEST_CASE("linear cover examples") {
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 1);
  const FunctionClass zero = FunctionClass::linear_cover(1, 2, ones, 0.0, 0.1, 2.0);
  CHECK(zero.size() == 1);
  CHECK(zero.cover_weights().norm() == 0.0);

  const FunctionClass one = FunctionClass::linear_cover(2, 1, ones, 1.0, 0.5, 2.0);
  for (std::int64_t m = 0; m < one.size(); ++m) CHECK(one.cover_weights().row(m).norm() <= 1.0 + 1e-12);
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double w = rng.uniform() * 2.0 - 1.0;
    double best = kInf;
    for (std::int64_t m = 0; m < one.size(); ++m) {
      best = std::min(best, std::abs(one.cover_weights()(m, 0) - w));
    }
    CHECK(best <= 0.5 + 1e-12);
  }

  Eigen::MatrixXd axes(2, 2);
  axes << 1.0, 0.0, 0.0, 1.0;
  const FunctionClass two = FunctionClass::linear_cover(1, 2, axes, 1.0, 0.1, 2.0);
  CHECK(two.size() <= 441);
}

TEST_CASE("cover property on random features") {
  Rng rng(11);
  for (int d : {2, 3}) {
    const Eigen::MatrixXd phi = random_features(6, d, rng);
    const double radius = 1.5, eps_c = d == 2 ? 0.05 : 0.15;
    const FunctionClass cls = FunctionClass::linear_cover(3, 2, phi, radius, eps_c, 2.0);
    REQUIRE(cls.enumerable());
    for (int i = 0; i < 10000; ++i) {
      const Eigen::VectorXd w = random_ball_point(d, radius, rng);
      const Eigen::VectorXd target = phi * w;
      // The snapped member must be eps_c-close in sup norm over the grid.
      const Eigen::VectorXd ws = cls.snap(w);
      CHECK(ws.norm() <= radius + 1e-12);
      CHECK((phi * ws - target).cwiseAbs().maxCoeff() <= eps_c + 1e-12);
    }
  }
}

TEST_CASE("enumerated regression is optimal over every member") {
  const FunctionClass cls = FunctionClass::grid(2, 2, 0.25, 2.0);
  CHECK(cls.size() == 6561);
  Rng rng(5);
  for (int rep = 0; rep < 3; ++rep) {
    std::vector<PairIndex> zs;
    std::vector<double> ys, sig;
    for (int s = 0; s < 30; ++s) {
      zs.push_back(rng.uniform_int(4));
      ys.push_back(2.0 * rng.uniform());
      sig.push_back(0.2 + rng.uniform());
    }
    const Fit fit = weighted_regression(cls, zs, ys, sig);
    const double best = rms_loss(cls, oracle::brute_regression(cls, zs, ys, sig), zs, ys, sig);
    CHECK(rms_loss(cls, fit.member, zs, ys, sig) <= best + 1e-9);
    CHECK(fit.loss == doctest::Approx(rms_loss(cls, fit.member, zs, ys, sig)).epsilon(1e-9));
  }
}

// The slack bound compares the snapped ridge solution with the best cover
// member, so it presumes the least-squares problem is well specified: simplex
// features, a non-negative truth inside the ball, and predictions away from
// the clip levels.
TEST_CASE("ridge-and-snap agrees with enumeration up to the cover slack") {
  Rng rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::MatrixXd phi(6, 2);
    for (int i = 0; i < 6; ++i) {
      const double u = rng.uniform();
      phi.row(i) << u, 1.0 - u;
    }
    const double eps_c = 0.05;
    const FunctionClass cls = FunctionClass::linear_cover(3, 2, phi, 1.0, eps_c, 2.0);
    REQUIRE(cls.enumerable());
    Eigen::VectorXd w_true(2);
    w_true << 0.2 + 0.5 * rng.uniform(), 0.2 + 0.5 * rng.uniform();
    std::vector<PairIndex> zs;
    std::vector<double> ys, sig;
    const int t = 60;
    for (int s = 0; s < t; ++s) {
      const PairIndex z = rng.uniform_int(6);
      zs.push_back(z);
      ys.push_back(std::clamp(phi.row(z).dot(w_true), 0.0, 2.0) + 0.1 * (rng.uniform() - 0.5));
      sig.push_back(1.0);
    }
    const Fit en = weighted_regression(cls, zs, ys, sig, RegressionMethod::kEnumerate);
    const Fit rs = weighted_regression(cls, zs, ys, sig, RegressionMethod::kRidgeSnap);
    const double slack = 2.0 * eps_c * eps_c * t + 4.0 * eps_c * std::sqrt(en.loss * t);
    CHECK(rs.loss <= en.loss + slack + 1e-9);
    CHECK(en.loss <= rs.loss + 1e-9);
  }
}

TEST_CASE("optimal loss never decreases when data is appended") {
  const FunctionClass cls = FunctionClass::grid(1, 3, 0.5, 2.0);
  Rng rng(23);
  std::vector<PairIndex> zs;
  std::vector<double> ys, sig;
  double prev = 0.0;
  for (int s = 0; s < 40; ++s) {
    zs.push_back(rng.uniform_int(3));
    ys.push_back(2.0 * rng.uniform());
    sig.push_back(0.5 + rng.uniform());
    const Fit fit = weighted_regression(cls, zs, ys, sig);
    CHECK(fit.loss >= prev - 1e-12);
    prev = fit.loss;
  }
}

TEST_CASE("large covers are implicit and use the ridge path") {
  Rng rng(2);
  const Eigen::MatrixXd phi = random_features(12, 4, rng);
  const FunctionClass cls = FunctionClass::linear_cover(4, 3, phi, 2.0, 0.001, 2.0);
  CHECK_FALSE(cls.enumerable());
  CHECK(cls.log_size() > std::log(1e5));
  const Fit fit = weighted_regression(cls, std::vector<PairIndex>{0, 1}, std::vector<double>{0.5, 0.7},
                                      std::vector<double>{1.0, 1.0});
  CHECK(fit.member == -1);
  CHECK(fit.weights.norm() <= 2.0 + 1e-12);
  CHECK_THROWS_AS(weighted_regression(cls, std::vector<PairIndex>{0}, std::vector<double>{0.5},
                                      std::vector<double>{1.0}, RegressionMethod::kEnumerate),
                  Error);
  CoverOptions tight;
  tight.member_cap = 1e6;
  CHECK_THROWS_AS(FunctionClass::linear_cover(4, 3, phi, 2.0, 1e-6, 2.0, tight), Error);
}
