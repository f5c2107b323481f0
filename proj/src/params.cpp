#include "voql/params.hpp"

#include <cmath>

namespace voql {

VoqlParams::VoqlParams(const ParamsConfig& config) : config_(config) {
  require(config_.T >= 1 && config_.H >= 1, "params: need T >= 1 and H >= 1");
  require(config_.lambda > 0.0, "params: lambda must be positive");
  require(config_.c_scale >= 0.0, "params: c_scale must be non-negative");
  require(config_.L > 0.0, "params: L must be positive");
  require(config_.eps >= 0.0 && config_.eps_b >= 0.0, "params: error terms must be >= 0");
  const double T = config_.T;
  const double H = config_.H;
  const double L = config_.L;
  alpha_ = config_.alpha > 0.0 ? config_.alpha : std::sqrt(1.0 / (T * H));
  delta_ = config_.delta > 0.0 ? config_.delta : 1.0 / (T + H * H + 12.0);
  require(delta_ < 1.0, "params: delta must lie in (0, 1)");
  delta_th_ = delta_ / ((T + 1.0) * (H + 1.0));

  const double log_N = config_.log_N;
  const double log_Nb = config_.log_Nb;
  K1_ = (2.0 * std::log(4.0 * L * T / alpha_) + 2.0) *
        (std::log(8.0 * L / (alpha_ * alpha_)) + 2.0);
  const double log_inv_delta = -std::log(delta_th_);
  upsilon_ = std::sqrt(2.0 * log_N + std::log(K1_) + log_inv_delta);
  iota_ = 3.0 * std::sqrt(log_N + log_Nb + std::log(K1_) + log_inv_delta);
  iota_dot_ = std::sqrt(2.0 * (log_N + log_Nb +
                               std::log((2.0 * std::log(18.0 * L * T) + 2.0) *
                                        (std::log(18.0 * L) + 2.0)) +
                               log_inv_delta));
  iota_prime_ = std::sqrt(2.0 * (log_N + log_Nb +
                                 std::log((2.0 * std::log(32.0 * L * T) + 2.0) *
                                          (std::log(32.0 * L) + 2.0)) +
                                 log_inv_delta));
  if (config_.C_u > 0.0) {
    C_u_ = config_.c_scale * config_.C_u;
  } else {
    require(config_.u_init >= 0.0, "params: u_init must be non-negative");
    C_u_ = config_.u_init / u_shape(1);
  }
}

double VoqlParams::beta1(int t) const {
  const double lambda = config_.lambda;
  const double base = std::sqrt(6.0 * std::sqrt(lambda) + 156.0) *
                      std::sqrt(2.0 * config_.log_N + std::log(K1_) - std::log(delta_th_));
  const double mis = std::sqrt(8.0 * t * config_.L * config_.eps / (alpha_ * alpha_));
  return config_.c_scale * (base + mis);
}

double VoqlParams::beta2(int t) const {
  const double L = config_.L;
  return config_.c_scale * std::sqrt(2.0 * (24.0 * L + 21.0) * iota_dot_ * iota_dot_ +
                                     20.0 * t * L * config_.eps);
}

double VoqlParams::beta_bar(int t) const {
  const double L = config_.L;
  return config_.c_scale * std::sqrt(8.0 * (11.0 * L + 9.0) * iota_prime_ * iota_prime_ +
                                     32.0 * t * L * config_.eps);
}

double VoqlParams::u_shape(int t) const {
  const double T = config_.T;
  const double H = config_.H;
  const double eps = config_.eps;
  const double log_base = config_.log_N + std::log(T * H / (alpha_ * delta_));
  const double first = std::sqrt(log_base + T * eps / (alpha_ * alpha_));
  const double second = (log_base + config_.log_Nb) * std::pow(H, 2.5) *
                            std::sqrt(std::max(config_.d_alpha, 0.0)) +
                        std::sqrt(static_cast<double>(t)) * H * config_.eps_b;
  return first * second / std::sqrt(static_cast<double>(t)) + H * H * eps + H * delta_;
}

double VoqlParams::u(int t) const { return C_u_ * u_shape(t); }

nlohmann::json VoqlParams::to_json() const {
  const int T = config_.T;
  return {{"T", T},
          {"H", config_.H},
          {"alpha", alpha_},
          {"lambda", config_.lambda},
          {"delta", delta_},
          {"delta_th", delta_th_},
          {"eps", config_.eps},
          {"eps_b", config_.eps_b},
          {"c_scale", config_.c_scale},
          {"C_u", C_u_},
          {"L", config_.L},
          {"log_N", config_.log_N},
          {"log_Nb", config_.log_Nb},
          {"d_alpha", config_.d_alpha},
          {"K1", K1_},
          {"upsilon", upsilon()},
          {"iota", iota()},
          {"beta1_first", beta1(1)},
          {"beta1_last", beta1(T)},
          {"beta2_last", beta2(T)},
          {"beta_bar_last", beta_bar(T)},
          {"u_first", u(1)},
          {"u_last", u(T)}};
}

double log_bonus_class_vs(double log_N) {
  return std::exp(log_N) * std::log(2.0) + log_N;
}

double log_bonus_class_subsample(double d_alpha, int T, double log_N, double delta,
                                 int num_pairs) {
  return std::max(d_alpha, 1.0) * (std::log(static_cast<double>(T)) + log_N - std::log(delta)) *
         std::log(static_cast<double>(T) * num_pairs / delta);
}

double log_bonus_class_elliptical(int dim, double beta, double lambda, double eps_c) {
  const double d = dim;
  return d * d * std::log1p(std::sqrt(d) * beta * beta / (lambda * eps_c * eps_c));
}

VoqlParams resolve_elliptical_params(ParamsConfig config, int dim, double eps_c) {
  require(eps_c > 0.0, "params: eps_c must be positive");
  config.log_Nb = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const VoqlParams p(config);
    const double beta = std::max(p.beta1(config.T), p.beta2(config.T));
    const double next = log_bonus_class_elliptical(dim, beta, config.lambda, eps_c);
    const bool done = std::abs(next - config.log_Nb) <= 1e-10 * std::max(1.0, next);
    config.log_Nb = next;
    if (done) break;
  }
  return VoqlParams(config);
}

double eluder_estimate_linear(int dim, double radius, int T, double alpha, double lambda) {
  const double d = dim;
  return d * std::log1p(radius * radius * T / (alpha * alpha * d * lambda));
}

double eluder_estimate_finite(double log_N, int num_pairs, double L, int T, double alpha,
                              double lambda) {
  const double n = std::min(std::exp(log_N), static_cast<double>(num_pairs));
  return n * std::log1p(L * L * T / (alpha * alpha * lambda));
}

}  // namespace voql
