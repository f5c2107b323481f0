#pragma once

// Confidence radii, weight floors and the switching threshold of the learner.

#include "json.hpp"
#include "voql/common.hpp"

namespace voql {

struct ParamsConfig {
  int T = 1;
  int H = 1;
  double delta = -1.0;    // negative: 1 / (T + H^2 + 12)
  double alpha = -1.0;    // negative: sqrt(1 / (T H))
  double lambda = 1.0;
  double eps = 0.0;       // completeness error
  double eps_b = 0.0;     // bonus error
  double c_scale = 1.0;   // 1 is theory mode
  double C_u = -1.0;      // explicit schedule constant, multiplied by c_scale
  double u_init = 2.0;    // when C_u is not set, C_u is chosen so that u_1 = u_init
  double L = 2.0;         // range of the value class
  double log_N = 0.0;     // log of the value-class size
  double log_Nb = 0.0;    // log of the bonus-class size
  double d_alpha = 1.0;   // Eluder dimension estimate used by u_t
};

class VoqlParams {
 public:
  explicit VoqlParams(const ParamsConfig& config);

  const ParamsConfig& config() const { return config_; }
  int T() const { return config_.T; }
  int H() const { return config_.H; }
  double alpha() const { return alpha_; }
  double lambda() const { return config_.lambda; }
  double delta() const { return delta_; }
  double delta_th() const { return delta_th_; }
  double eps() const { return config_.eps; }
  double L() const { return config_.L; }
  double c_scale() const { return config_.c_scale; }

  // Unscaled auxiliary quantities.
  double K1() const { return K1_; }
  double iota_dot() const { return iota_dot_; }
  double iota_prime() const { return iota_prime_; }

  // Scaled by c_scale.
  double upsilon() const { return config_.c_scale * upsilon_; }
  double iota() const { return config_.c_scale * iota_; }
  double beta1(int t) const;
  double beta2(int t) const;
  double beta_bar(int t) const;
  double u(int t) const;
  double C_u() const { return C_u_; }

  nlohmann::json to_json() const;

 private:
  double u_shape(int t) const;

  ParamsConfig config_;
  double alpha_;
  double delta_;
  double delta_th_;
  double K1_;
  double upsilon_;
  double iota_;
  double iota_dot_;
  double iota_prime_;
  double C_u_;
};

// log |W| for the exact version-space oracle: a subset of members times a center.
double log_bonus_class_vs(double log_N);

// log |W| for sensitivity subsampling: d_alpha log(T N / delta) log(T |Z| / delta).
double log_bonus_class_subsample(double d_alpha, int T, double log_N, double delta,
                                 int num_pairs);

// log |W| = d^2 log(1 + sqrt(d) beta^2 / (lambda eps_c^2)) for elliptical bonuses.
double log_bonus_class_elliptical(int dim, double beta, double lambda, double eps_c);

// Solves log_Nb = log_bonus_class_elliptical(dim, beta(log_Nb), ...) where beta
// is the largest scaled radius at t = T, by fixed-point iteration.
VoqlParams resolve_elliptical_params(ParamsConfig config, int dim, double eps_c);

// d log(1 + B^2 T / (alpha^2 d lambda)).
double eluder_estimate_linear(int dim, double radius, int T, double alpha, double lambda);
// min(N, |Z|) log(1 + L^2 T / (alpha^2 lambda)).
double eluder_estimate_finite(double log_N, int num_pairs, double L, int T, double alpha,
                              double lambda);

}  // namespace voql
