#include "doctest.h"
#include "oracles.hpp"
#include "voql/eluder.hpp"
#include "voql/function_class.hpp"

using namespace voql;

namespace {

Eigen::MatrixXd ball_features(int rows, int d, Rng& rng) {
  Eigen::MatrixXd phi(rows, d);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < d; ++j) phi(i, j) = rng.uniform() * 2.0 - 1.0;
    phi.row(i) /= std::max(1.0, phi.row(i).norm());
  }
  return phi;
}

FunctionClass random_finite_class(int members, int pairs, double range, Rng& rng) {
  std::vector<std::vector<double>> tables(members, std::vector<double>(pairs));
  for (auto& t : tables) {
    for (double& v : t) v = range * rng.uniform();
  }
  return FunctionClass::finite(pairs, 1, std::move(tables), range);
}

}  // namespace

TEST_CASE("dsq examples on the two-member class") {
  const FunctionClass cls = FunctionClass::finite(1, 1, {{0.0}, {1.0}}, 1.0);
  FiniteUncertainty ctx(cls, 1.0);
  CHECK(ctx.dsq(0) == doctest::Approx(1.0));
  ctx.append(0, 1.0);
  CHECK(ctx.dsq(0) == doctest::Approx(0.5));
  CHECK_FALSE(ctx.degenerate());
  CHECK_THROWS_AS(ctx.append(0, 0.0), Error);
  CHECK_THROWS_AS(FiniteUncertainty(cls, 0.0), Error);
}

TEST_CASE("a single-member class has no uncertainty") {
  const FunctionClass cls = FunctionClass::finite(2, 1, {{0.3, 0.9}}, 1.0);
  FiniteUncertainty ctx(cls, 1.0);
  CHECK(ctx.degenerate());
  CHECK(ctx.dsq(0) == 0.0);
  CHECK(ctx.dsq(1) == 0.0);
}

TEST_CASE("generalized Eluder dimension examples") {
  const FunctionClass cls = FunctionClass::finite(1, 1, {{0.0}, {1.0}}, 1.0);
  FiniteUncertainty ctx(cls, 1.0);
  const std::vector<PairIndex> zs = {0, 0, 0};
  CHECK(gen_eluder_dim(ctx, zs, std::vector<double>{1.0, 1.0, 1.0}) ==
        doctest::Approx(11.0 / 6.0));

  // With sigma = 2 every earlier point adds 1/4 to the denominator, so the
  // i-th term is min(1, (1 / (1 + i / 4)) / 4).
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) expected += std::min(1.0, (1.0 / (1.0 + i / 4.0)) / 4.0);
  const std::vector<double> twos = {2.0, 2.0, 2.0};
  CHECK(gen_eluder_dim(ctx, zs, twos) == doctest::Approx(expected));
  CHECK(gen_eluder_dim(ctx, zs, twos) ==
        doctest::Approx(oracle::brute_eluder(cls, zs, twos, 1.0)));

  // The context itself is left untouched, and mismatched lengths are rejected.
  CHECK(ctx.history().empty());
  CHECK_THROWS_AS(gen_eluder_dim(ctx, zs, std::vector<double>{1.0}), Error);
}

TEST_CASE("cached pair sums agree with direct summation under arbitrary weights") {
  Rng rng(41);
  for (int rep = 0; rep < 5; ++rep) {
    const FunctionClass cls = random_finite_class(12, 5, 2.0, rng);
    const double lambda = 0.25 + rng.uniform();
    FiniteUncertainty ctx(cls, lambda);
    std::vector<PairIndex> zs;
    std::vector<double> sigmas;
    for (int s = 0; s < 30; ++s) {
      // Weights span two orders of magnitude so that rescaled sigmas are covered.
      const double scale = (rep % 2 == 0) ? 1.0 : 10.0;
      const PairIndex z = rng.uniform_int(5);
      const double sigma = scale * (0.1 + rng.uniform());
      for (PairIndex q = 0; q < 5; ++q) {
        CHECK(ctx.dsq(q) ==
              doctest::Approx(oracle::brute_dsq(cls, q, zs, sigmas, lambda)).epsilon(1e-10));
      }
      ctx.append(z, sigma);
      zs.push_back(z);
      sigmas.push_back(sigma);
    }
    CHECK(gen_eluder_dim(FiniteUncertainty(cls, lambda), zs, sigmas) ==
          doctest::Approx(oracle::brute_eluder(cls, zs, sigmas, lambda)).epsilon(1e-10));
  }
}

TEST_CASE("dsq never increases when history is appended") {
  Rng rng(43);
  const FunctionClass finite = random_finite_class(20, 6, 1.0, rng);
  const Eigen::MatrixXd phi = ball_features(6, 3, rng);
  std::vector<std::unique_ptr<UncertaintyContext>> contexts;
  contexts.push_back(std::make_unique<FiniteUncertainty>(finite, 1.0));
  contexts.push_back(std::make_unique<EllipticalUncertainty>(phi, 1.0, 1.0));
  contexts.push_back(std::make_unique<EllipticalUncertainty>(phi, 1.0, 1.0, LinearDsqForm::kExact));
  for (auto& ctx : contexts) {
    std::vector<double> prev(6);
    for (PairIndex z = 0; z < 6; ++z) prev[z] = ctx->dsq(z);
    for (int s = 0; s < 50; ++s) {
      ctx->append(rng.uniform_int(6), 0.2 + rng.uniform());
      for (PairIndex z = 0; z < 6; ++z) {
        const double cur = ctx->dsq(z);
        CHECK(cur >= 0.0);
        CHECK(cur <= prev[z] * (1.0 + 1e-12) + 1e-15);
        prev[z] = cur;
      }
    }
  }
}

TEST_CASE("elliptical forms against direct inversion") {
  Rng rng(47);
  const Eigen::MatrixXd phi = ball_features(8, 3, rng);
  const double radius = 0.7, lambda = 0.5;
  EllipticalUncertainty sur(phi, radius, lambda);
  EllipticalUncertainty exact(phi, radius, lambda, LinearDsqForm::kExact);
  Eigen::MatrixXd sigma = lambda / (4.0 * radius * radius) * Eigen::MatrixXd::Identity(3, 3);
  for (int s = 0; s < 25; ++s) {
    const PairIndex z = rng.uniform_int(8);
    const double w = 0.3 + rng.uniform();
    sur.append(z, w);
    exact.append(z, w);
    sigma += phi.row(z).transpose() * phi.row(z) / (w * w);
  }
  const Eigen::MatrixXd inv = sigma.inverse();
  for (PairIndex z = 0; z < 8; ++z) {
    const Eigen::VectorXd v = phi.row(z).transpose();
    const double norm_sq = v.dot(inv * v);
    CHECK(exact.dsq(z) == doctest::Approx(norm_sq).epsilon(1e-10));
    CHECK(sur.dsq(z) == doctest::Approx(4.0 * norm_sq).epsilon(1e-10));
  }
}

TEST_CASE("exact elliptical form tracks the cover-pair sup within ten percent") {
  Rng rng(53);
  const int rows = 100, d = 2;
  const double radius = 0.5, eps_c = 0.02, lambda = 1.0;
  const Eigen::MatrixXd phi = ball_features(rows, d, rng);
  const FunctionClass cover = FunctionClass::linear_cover(rows, 1, phi, radius, eps_c, 2.0 * radius);
  REQUIRE(cover.enumerable());
  const FunctionClass finite = oracle::unclipped_cover(cover);
  FiniteUncertainty brute(finite, lambda);
  EllipticalUncertainty ell(phi, radius, lambda, LinearDsqForm::kExact);
  EllipticalUncertainty sur(phi, radius, lambda);
  for (int s = 0; s < 10; ++s) {
    const PairIndex z = rng.uniform_int(rows);
    brute.append(z, 1.0);
    ell.append(z, 1.0);
    sur.append(z, 1.0);
  }
  for (int q = 0; q < 100; ++q) {
    const PairIndex z = rng.uniform_int(rows);
    const double b = brute.dsq(z), e = ell.dsq(z);
    CHECK(b <= e * (1.0 + 1e-9) + 1e-12);
    CHECK(b >= 0.9 * e);
    CHECK(sur.dsq(z) >= b);
  }
}

TEST_CASE("linear Eluder dimension stays under the logarithmic bound") {
  Rng rng(59);
  const int T = 300;
  const double radius = 1.0, lambda = 1.0, alpha = std::sqrt(1.0 / T);
  for (int d : {2, 3}) {
    for (int rep = 0; rep < 5; ++rep) {
      const Eigen::MatrixXd phi = ball_features(40, d, rng);
      EllipticalUncertainty ctx(phi, radius, lambda);
      std::vector<PairIndex> zs(T);
      for (PairIndex& z : zs) z = rng.uniform_int(40);
      const double dim = gen_eluder_dim(ctx, zs, std::vector<double>(T, 1.0));
      const double bound =
          4.0 * d * std::log(1.0 + radius * radius * T / (alpha * alpha * d * lambda));
      CHECK(dim <= bound);
      CHECK(dim > 0.0);
    }
  }
}

TEST_CASE("Sherman-Morrison inverse matches fresh inversion after many updates") {
  Rng rng(61);
  for (int d : {2, 4, 6}) {
    ShermanMorrisonInverse inv(d, 0.25);
    Eigen::MatrixXd m = 0.25 * Eigen::MatrixXd::Identity(d, d);
    for (int s = 0; s < 1000; ++s) {
      Eigen::VectorXd v(d);
      for (int j = 0; j < d; ++j) v(j) = rng.uniform() * 2.0 - 1.0;
      const double c = 1.0 / std::pow(0.1 + rng.uniform(), 2);
      inv.add(v, c);
      m += c * v * v.transpose();
    }
    CHECK((inv.inverse() - m.inverse()).norm() <= 1e-8);
  }
  CHECK_THROWS_AS(ShermanMorrisonInverse(2, 0.0), Error);
}

TEST_CASE("make_uncertainty picks the form by class kind") {
  Rng rng(67);
  const Eigen::MatrixXd phi = ball_features(4, 2, rng);
  const FunctionClass lin = FunctionClass::linear_cover(2, 2, phi, 1.0, 0.2, 2.0);
  CHECK(dynamic_cast<EllipticalUncertainty*>(make_uncertainty(lin, 1.0).get()) != nullptr);
  CHECK(dynamic_cast<FiniteUncertainty*>(
            make_uncertainty(lin, 1.0, LinearDsqForm::kSurrogate, false).get()) != nullptr);
  const FunctionClass point = FunctionClass::linear_cover(2, 2, phi, 0.0, 0.2, 2.0);
  CHECK(make_uncertainty(point, 1.0)->degenerate());
  const FunctionClass grid = FunctionClass::grid(1, 2, 0.5, 1.0);
  CHECK(dynamic_cast<FiniteUncertainty*>(make_uncertainty(grid, 1.0).get()) != nullptr);
}
