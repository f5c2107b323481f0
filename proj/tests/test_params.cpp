#include "doctest.h"
#include "voql/params.hpp"

#include <cmath>

using namespace voql;

namespace {

ParamsConfig base_config() {
  ParamsConfig c;
  c.T = 200;
  c.H = 3;
  c.L = 2.0;
  c.log_N = std::log(500.0);
  c.log_Nb = std::log(40.0);
  c.d_alpha = 6.0;
  return c;
}

}  // namespace

TEST_CASE("default parameter choices") {
  const VoqlParams p(base_config());
  CHECK(p.alpha() == doctest::Approx(std::sqrt(1.0 / 600.0)));
  CHECK(p.delta() == doctest::Approx(1.0 / (200.0 + 9.0 + 12.0)));
  CHECK(p.delta_th() == doctest::Approx(p.delta() / (201.0 * 4.0)));
  CHECK(p.lambda() == 1.0);
  CHECK(p.c_scale() == 1.0);

  ParamsConfig c = base_config();
  c.alpha = 0.3;
  c.delta = 0.1;
  const VoqlParams q(c);
  CHECK(q.alpha() == 0.3);
  CHECK(q.delta() == 0.1);
}

TEST_CASE("confidence radii recomputed by hand") {
  ParamsConfig c = base_config();
  c.eps = 0.01;
  const VoqlParams p(c);
  const double T = 200, L = 2.0, a = p.alpha();
  const double dth = p.delta_th();
  const double K1 = (2.0 * std::log(4.0 * L * T / a) + 2.0) * (std::log(8.0 * L / (a * a)) + 2.0);
  CHECK(p.K1() == doctest::Approx(K1));
  const int t = 17;
  const double b1 = std::sqrt(6.0 + 156.0) * std::sqrt(2.0 * c.log_N + std::log(K1) - std::log(dth)) +
                    std::sqrt(8.0 * t * L * c.eps / (a * a));
  CHECK(p.beta1(t) == doctest::Approx(b1));
  const double idot = std::sqrt(2.0 * (c.log_N + c.log_Nb +
                                       std::log((2.0 * std::log(18.0 * L * T) + 2.0) *
                                                (std::log(18.0 * L) + 2.0)) -
                                       std::log(dth)));
  CHECK(p.iota_dot() == doctest::Approx(idot));
  CHECK(p.beta2(t) ==
        doctest::Approx(std::sqrt(2.0 * (24.0 * L + 21.0) * idot * idot + 20.0 * t * L * c.eps)));
  const double iprime = std::sqrt(2.0 * (c.log_N + c.log_Nb +
                                         std::log((2.0 * std::log(32.0 * L * T) + 2.0) *
                                                  (std::log(32.0 * L) + 2.0)) -
                                         std::log(dth)));
  CHECK(p.beta_bar(t) ==
        doctest::Approx(std::sqrt(8.0 * (11.0 * L + 9.0) * iprime * iprime + 32.0 * t * L * c.eps)));
  CHECK(p.upsilon() == doctest::Approx(std::sqrt(2.0 * c.log_N + std::log(K1) - std::log(dth))));
  CHECK(p.iota() ==
        doctest::Approx(3.0 * std::sqrt(c.log_N + c.log_Nb + std::log(K1) - std::log(dth))));
}

TEST_CASE("radii are non-decreasing in t") {
  for (double eps : {0.0, 1e-3}) {
    ParamsConfig c = base_config();
    c.eps = eps;
    const VoqlParams p(c);
    for (int t = 1; t < c.T; ++t) {
      CHECK(p.beta1(t + 1) >= p.beta1(t));
      CHECK(p.beta2(t + 1) >= p.beta2(t));
      CHECK(p.beta_bar(t + 1) >= p.beta_bar(t));
    }
    if (eps == 0.0) CHECK(p.beta1(1) == p.beta1(c.T));
  }
}

TEST_CASE("c_scale multiplies every radius linearly") {
  ParamsConfig c = base_config();
  const VoqlParams theory(c);
  c.c_scale = 0.25;
  const VoqlParams tuned(c);
  for (int t : {1, 50, 200}) {
    CHECK(tuned.beta1(t) == doctest::Approx(0.25 * theory.beta1(t)));
    CHECK(tuned.beta2(t) == doctest::Approx(0.25 * theory.beta2(t)));
    CHECK(tuned.beta_bar(t) == doctest::Approx(0.25 * theory.beta_bar(t)));
  }
  CHECK(tuned.iota() == doctest::Approx(0.25 * theory.iota()));
  CHECK(tuned.upsilon() == doctest::Approx(0.25 * theory.upsilon()));
  c.c_scale = 0.0;
  const VoqlParams zero(c);
  CHECK(zero.beta1(10) == 0.0);
  CHECK(zero.beta2(10) == 0.0);
  CHECK(zero.iota() == 0.0);
}

TEST_CASE("switching threshold schedule") {
  ParamsConfig c = base_config();
  const VoqlParams standard(c);
  CHECK(standard.u(1) == doctest::Approx(2.0));
  for (int t = 1; t < c.T; ++t) CHECK(standard.u(t + 1) <= standard.u(t));
  // The decay is the inverse square root once the additive terms are tiny.
  CHECK(standard.u(100) / standard.u(25) == doctest::Approx(0.5).epsilon(0.01));

  c.u_init = 7.0;
  CHECK(VoqlParams(c).u(1) == doctest::Approx(7.0));

  // An explicit constant is scaled like every other radius.
  c.C_u = 3.0;
  c.c_scale = 0.5;
  const VoqlParams manual(c);
  CHECK(manual.C_u() == doctest::Approx(1.5));
  CHECK(manual.u(4) / manual.u(1) == doctest::Approx(standard.u(4) / standard.u(1)));
}

TEST_CASE("parameter validation") {
  ParamsConfig c = base_config();
  c.T = 0;
  CHECK_THROWS_AS(VoqlParams{c}, Error);
  c = base_config();
  c.lambda = 0.0;
  CHECK_THROWS_AS(VoqlParams{c}, Error);
  c = base_config();
  c.c_scale = -1.0;
  CHECK_THROWS_AS(VoqlParams{c}, Error);
  c = base_config();
  c.delta = 1.5;
  CHECK_THROWS_AS(VoqlParams{c}, Error);
  c = base_config();
  c.eps = -0.1;
  CHECK_THROWS_AS(VoqlParams{c}, Error);
  c = base_config();
  c.u_init = -1.0;
  CHECK_THROWS_AS(VoqlParams{c}, Error);
}

TEST_CASE("bonus-class sizes and Eluder estimates") {
  CHECK(log_bonus_class_vs(std::log(2.0)) == doctest::Approx(3.0 * std::log(2.0)));
  CHECK(log_bonus_class_subsample(2.0, 100, std::log(4.0), 0.1, 6) ==
        doctest::Approx(2.0 * std::log(100.0 * 4.0 / 0.1) * std::log(100.0 * 6.0 / 0.1)));
  CHECK(log_bonus_class_elliptical(2, 1.0, 1.0, 0.1) ==
        doctest::Approx(4.0 * std::log1p(std::sqrt(2.0) * 100.0)));
  CHECK(eluder_estimate_linear(3, 1.0, 100, 0.1, 1.0) ==
        doctest::Approx(3.0 * std::log1p(100.0 / (0.01 * 3.0))));
  CHECK(eluder_estimate_finite(std::log(1000.0), 6, 2.0, 100, 0.1, 1.0) ==
        doctest::Approx(6.0 * std::log1p(4.0 * 100.0 / 0.01)));
  CHECK(eluder_estimate_finite(std::log(2.0), 6, 2.0, 100, 0.1, 1.0) ==
        doctest::Approx(2.0 * std::log1p(4.0 * 100.0 / 0.01)));
}

TEST_CASE("elliptical bonus-class size is a fixed point of its own radius") {
  ParamsConfig c = base_config();
  c.log_Nb = 0.0;
  c.c_scale = 0.1;
  const VoqlParams p = resolve_elliptical_params(c, 3, 0.05);
  const double beta = std::max(p.beta1(c.T), p.beta2(c.T));
  CHECK(p.config().log_Nb ==
        doctest::Approx(log_bonus_class_elliptical(3, beta, c.lambda, 0.05)).epsilon(1e-8));
  CHECK_THROWS_AS(resolve_elliptical_params(c, 3, 0.0), Error);
  const auto j = p.to_json();
  CHECK(j["u_first"].get<double>() == doctest::Approx(2.0));
  CHECK(j["T"] == c.T);
}
