#pragma once

// Closed-form and quadrature expressions for link connection probability,
// ergodic rate and mean node degree under a Poisson field of randomly
// oriented interferers with Rayleigh fading.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "dirnet/core_model.hpp"
#include "dirnet/errors.hpp"
#include "dirnet/specfun.hpp"

namespace dirnet {

/// The composite variable s = q gamma / (g(t) G Gbar) of the interference
/// Laplace transform, evaluated at s / P.
struct LaplaceArgument {
  double s;
  explicit LaplaceArgument(double value) : s(value) {}
};

namespace detail {

inline void require_eta(double eta) {
  if (!(eta > 2.0) || !std::isfinite(eta)) throw domain_error("pathloss exponent must exceed 2");
}

inline void require_directivity(double d) {
  if (!(d >= 0.0 && d <= 1.0)) throw domain_error("directivity must lie in [0, 1]");
}

// pi / (eta sin(2 pi / eta)): the radial integral of sigma t / (t^eta + sigma)
// over (0, inf) per unit sigma^{2/eta}.
inline double radial_constant(double eta) { return std::numbers::pi / (eta * std::sin(2.0 * std::numbers::pi / eta)); }

inline void require_noise_or_interference(const SystemParams& params) {
  if (params.orthogonality == 0.0 && params.noise == 0.0)
    throw domain_error("orthogonality and noise are both zero: the link is never in outage");
}

inline double wrap_two_pi(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(x, two_pi);
  if (r < 0.0) r += two_pi;
  return r;
}

// Gain arguments where a fully directional pattern vanishes.
inline std::vector<double> null_arguments(const AntennaPattern& pattern) {
  std::vector<double> out;
  if (pattern.directivity != 1.0) return out;
  for (int k = 0; k < pattern.lobes; ++k) out.push_back((2.0 * k + 1.0) * std::numbers::pi / pattern.lobes);
  return out;
}

// Sorted breakpoints over [0, 2 pi]: the quarter points plus `extra`.
inline std::vector<double> angular_partition(std::vector<double> extra) {
  const double pi = std::numbers::pi;
  extra.insert(extra.end(), {0.0, 0.5 * pi, pi, 1.5 * pi, 2.0 * pi});
  std::sort(extra.begin(), extra.end());
  std::vector<double> out;
  for (double x : extra)
    if (out.empty() || x - out.back() > 1e-12) out.push_back(x);
  out.back() = 2.0 * pi;
  return out;
}

// Kinks of the (position angle) integrand at fixed transmitter orientation:
// receiver nulls and transmitter nulls.
inline std::vector<double> position_breakpoints(const AntennaPattern& tx, const AntennaPattern& rx,
                                                double orientation) {
  std::vector<double> pts = null_arguments(rx);
  for (double a : null_arguments(tx)) pts.push_back(wrap_two_pi(a + orientation - std::numbers::pi));
  return angular_partition(std::move(pts));
}

// Orientations at which a transmitter null meets a receiver null.
inline std::vector<double> orientation_breakpoints(const AntennaPattern& tx, const AntennaPattern& rx) {
  std::vector<double> pts;
  for (double ar : null_arguments(rx))
    for (double at : null_arguments(tx)) pts.push_back(wrap_two_pi(ar + std::numbers::pi - at));
  return angular_partition(std::move(pts));
}

}  // namespace detail

/// Gamma-function form of the gain integral for a fully directional pattern.
inline double wp_fully_directional(double eta) {
  detail::require_eta(eta);
  const double p = 2.0 / eta;
  return std::pow(2.0, p) * eta * std::sqrt(std::numbers::pi) * gamma_fn(0.5 + p) / gamma_fn(p);
}

/// Two-term hypergeometric form of the gain integral, valid for 0 <= d < 1.
inline double wp_hypergeometric(double eta, double d) {
  detail::require_eta(eta);
  if (!(d >= 0.0 && d < 1.0)) throw domain_error("wp_hypergeometric: directivity must lie in [0, 1)");
  const double p = 2.0 / eta;
  const double lower = std::pow(1.0 - d, p) * hyp2f1(0.5, -p, 1.0, 2.0 * d / (d - 1.0));
  const double upper = std::pow(1.0 + d, p) * hyp2f1(0.5, -p, 1.0, 2.0 * d / (d + 1.0));
  return std::numbers::pi * (lower + upper);
}

/// Gain integral  wp_eta(d) = integral over [0, 2 pi) of G(theta)^{2/eta}.
/// Independent of the lobe count; equals 2 pi at d = 0.
inline double wp(double eta, double d) {
  detail::require_eta(eta);
  detail::require_directivity(d);
  if (d == 1.0) return wp_fully_directional(eta);
  return wp_hypergeometric(eta, d);
}

/// Second-order small-directivity expansion of wp:
/// 2 pi - pi (eta - 2) d^2 / eta^2, with an O(d^4) remainder.
inline double wp_taylor(double eta, double d) {
  detail::require_eta(eta);
  return 2.0 * std::numbers::pi - std::numbers::pi * (eta - 2.0) * d * d / (eta * eta);
}

/// The double integral I with L_I(s/P) = exp(-(rho / 2 pi) I).
///
/// epsilon = 0 uses the closed form pi s^{2/eta} wp_tx wp_rx / (eta sin(2 pi/eta));
/// epsilon > 0 integrates pi sigma (epsilon + sigma)^{2/eta - 1} / (eta sin(2 pi/eta))
/// over the interferer's angular position and orientation.
inline double laplace_exponent(const SystemParams& params, LaplaceArgument s, const AntennaPattern& tx_pattern,
                               const AntennaPattern& rx_pattern, const QuadratureSpec& quad = {}) {
  const double eta = params.pathloss_exponent;
  detail::require_eta(eta);
  if (!(s.s >= 0.0)) throw domain_error("laplace_exponent: s must be non-negative");
  if (s.s == 0.0) return 0.0;
  const double p = 2.0 / eta;
  const double constant = detail::radial_constant(eta);
  const double eps = params.pathloss_offset;
  if (eps == 0.0)
    return constant * std::pow(s.s, p) * wp(eta, tx_pattern.directivity) * wp(eta, rx_pattern.directivity);

  auto integrand = [&](double orientation, double position_angle) {
    const double sigma =
        s.s * transmitter_gain(tx_pattern, position_angle, orientation) * receiver_gain(rx_pattern, position_angle);
    if (sigma <= 0.0) return 0.0;
    return constant * sigma * std::pow(eps + sigma, p - 1.0);
  };
  const auto outer = detail::orientation_breakpoints(tx_pattern, rx_pattern);
  return integrate_2d(
             integrand, std::span<const double>(outer),
             [&](double orientation) { return detail::position_breakpoints(tx_pattern, rx_pattern, orientation); },
             quad)
      .value;
}

/// Connection probability H = P[SINR >= q] of a tagged link.
///
/// Closed form for epsilon = 0; for epsilon > 0 the interference Laplace
/// transform comes from laplace_exponent. A link with zero gain product
/// (a null pointed along the link) has H = 0.
inline double connection_probability(const SystemParams& params, const LinkGeometry& link,
                                     const AntennaPattern& tx_pattern, const AntennaPattern& rx_pattern,
                                     const QuadratureSpec& quad = {}) {
  params.validate();
  tx_pattern.validate();
  rx_pattern.validate();
  detail::require_noise_or_interference(params);
  if (!(link.distance >= 0.0)) throw domain_error("connection_probability: distance must be non-negative");

  const double eta = params.pathloss_exponent;
  const double q = params.threshold;
  const double product = link_gain(tx_pattern, rx_pattern, link);
  if (product <= 0.0) return 0.0;

  if (params.pathloss_offset == 0.0) {
    const double t = link.distance;
    if (t == 0.0) return 1.0;
    const double noise_term = q * params.noise * std::pow(t, eta) / (params.power * product);
    double interference_term = 0.0;
    if (params.orthogonality > 0.0 && params.density > 0.0) {
      interference_term = params.density * t * t * wp(eta, tx_pattern.directivity) *
                          wp(eta, rx_pattern.directivity) / (2.0 * eta * std::sin(2.0 * std::numbers::pi / eta)) *
                          std::pow(q * params.orthogonality / product, 2.0 / eta);
    }
    return std::exp(-noise_term - interference_term);
  }

  const double g = path_loss(params, link.distance);
  const double noise_term = q * params.noise / (params.power * g * product);
  double interference_term = 0.0;
  if (params.orthogonality > 0.0 && params.density > 0.0) {
    const LaplaceArgument s{q * params.orthogonality / (g * product)};
    interference_term =
        params.density / (2.0 * std::numbers::pi) * laplace_exponent(params, s, tx_pattern, rx_pattern, quad);
  }
  return std::exp(-noise_term - interference_term);
}

/// Ergodic rate E[ln(1 + SINR)] in nats per channel use, by quadrature of
/// P[SINR > e^x - 1] over x in [0, inf).
inline double data_rate(const SystemParams& params, const LinkGeometry& link, const AntennaPattern& tx_pattern,
                        const AntennaPattern& rx_pattern, const QuadratureSpec& quad = {}) {
  params.validate();
  tx_pattern.validate();
  rx_pattern.validate();
  quad.validate();
  detail::require_noise_or_interference(params);
  if (!(link.distance >= 0.0)) throw domain_error("data_rate: distance must be non-negative");

  const double eta = params.pathloss_exponent;
  const double product = link_gain(tx_pattern, rx_pattern, link);
  if (product <= 0.0) return 0.0;
  const double g = path_loss(params, link.distance);  // throws for t = 0, epsilon = 0
  const double noise_coefficient = params.noise / (params.power * g * product);
  const bool with_interference = params.orthogonality > 0.0 && params.density > 0.0;
  if (noise_coefficient == 0.0 && !with_interference)
    throw domain_error("data_rate: no noise and no interference, the rate is unbounded");

  const double gamma_coefficient = params.orthogonality / (g * product);
  std::function<double(double)> interference_term;
  if (!with_interference) {
    interference_term = [](double) { return 0.0; };
  } else if (params.pathloss_offset == 0.0) {
    const double coefficient = params.density / (2.0 * std::numbers::pi) * detail::radial_constant(eta) *
                               wp(eta, tx_pattern.directivity) * wp(eta, rx_pattern.directivity) *
                               std::pow(gamma_coefficient, 2.0 / eta);
    interference_term = [coefficient, eta](double q_hat) { return coefficient * std::pow(q_hat, 2.0 / eta); };
  } else {
    interference_term = [&](double q_hat) {
      return params.density / (2.0 * std::numbers::pi) *
             laplace_exponent(params, LaplaceArgument{q_hat * gamma_coefficient}, tx_pattern, rx_pattern, quad);
    };
  }

  auto integrand = [&](double x) {
    const double q_hat = std::expm1(x);
    return std::exp(-q_hat * noise_coefficient - interference_term(q_hat));
  };

  // The integrand is decreasing and decays double-exponentially once
  // q_hat times its coefficients exceeds one; extend the range until the
  // integrand falls below the absolute tolerance.
  double upper = 1.0;
  while (integrand(upper) > quad.abs_tol * 1e-3) {
    upper *= 2.0;
    if (upper > 700.0) throw non_convergence_error("data_rate: integrand does not decay", 0.0, 0.0);
  }
  return integrate_1d(integrand, 0.0, upper, quad).value;
}

/// Mean node degree for eta = 4, epsilon = 0:
/// mu = 2 / sqrt(pi q gamma) * z e^{z^2} erfc(z),  z = sqrt(gamma P / N) wp_4(d)^2 rho / 16.
inline double mean_degree_closed_form(const SystemParams& params, double d) {
  params.validate();
  detail::require_directivity(d);
  if (params.pathloss_exponent != 4.0) throw domain_error("mean_degree_closed_form requires pathloss_exponent = 4");
  if (params.pathloss_offset != 0.0) throw domain_error("mean_degree_closed_form requires pathloss_offset = 0");
  if (params.orthogonality == 0.0) throw domain_error("mean_degree_closed_form requires orthogonality > 0");
  if (params.density == 0.0) return 0.0;
  const double prefactor = 2.0 / std::sqrt(std::numbers::pi * params.threshold * params.orthogonality);
  // Noise-free limit of z e^{z^2} erfc(z) as z -> inf is 1/sqrt(pi).
  if (params.noise == 0.0) return prefactor / std::sqrt(std::numbers::pi);
  const double w = wp(4.0, d);
  const double z = std::sqrt(params.orthogonality * params.power / params.noise) * w * w * params.density / 16.0;
  return prefactor * z * erfcx(z);
}

/// Mean node degree by iterated quadrature of the connection probability
/// over the plane and the transmitter orientation; any eta > 2, epsilon = 0.
inline double mean_degree_numeric(const SystemParams& params, const AntennaPattern& tx_pattern,
                                  const AntennaPattern& rx_pattern, const QuadratureSpec& quad = {}) {
  params.validate();
  tx_pattern.validate();
  rx_pattern.validate();
  quad.validate();
  if (params.pathloss_offset != 0.0) throw domain_error("mean_degree_numeric requires pathloss_offset = 0");
  detail::require_noise_or_interference(params);
  if (params.density == 0.0) return 0.0;

  const double eta = params.pathloss_exponent;
  const double q = params.threshold;
  const double interference_scale = params.density * wp(eta, tx_pattern.directivity) *
                                    wp(eta, rx_pattern.directivity) /
                                    (2.0 * eta * std::sin(2.0 * std::numbers::pi / eta));

  QuadratureSpec radial_spec = quad;
  radial_spec.abs_tol = quad.abs_tol * 1e-2;
  radial_spec.rel_tol = quad.rel_tol * 1e-2;

  // integral over t of H(t) t for one (position angle, orientation) pair.
  auto radial = [&](double position_angle, double orientation) {
    const double product = transmitter_gain(tx_pattern, position_angle, orientation) *
                           receiver_gain(rx_pattern, position_angle);
    if (product <= 0.0) return 0.0;
    const double a = q * params.noise / (params.power * product);  // coefficient of t^eta
    const double b = params.orthogonality > 0.0
                         ? interference_scale * std::pow(q * params.orthogonality / product, 2.0 / eta)
                         : 0.0;  // coefficient of t^2
    auto exponent = [&](double t) { return a * std::pow(t, eta) + b * t * t; };
    // Scale where the exponent first reaches one; truncate where it exceeds 60.
    double scale = std::numeric_limits<double>::infinity();
    if (a > 0.0) scale = std::min(scale, std::pow(a, -1.0 / eta));
    if (b > 0.0) scale = std::min(scale, 1.0 / std::sqrt(b));
    double cutoff = scale;
    while (exponent(cutoff) < 60.0) cutoff *= 2.0;
    auto f = [&](double t) { return std::exp(-exponent(t)) * t; };
    return integrate_1d(f, 0.0, scale, radial_spec).value + integrate_1d(f, scale, cutoff, radial_spec).value;
  };

  auto angular = [&](double orientation, double position_angle) { return radial(position_angle, orientation); };
  const auto outer = detail::orientation_breakpoints(tx_pattern, rx_pattern);
  const double total =
      integrate_2d(
          angular, std::span<const double>(outer),
          [&](double orientation) { return detail::position_breakpoints(tx_pattern, rx_pattern, orientation); }, quad)
          .value;
  return params.density / (2.0 * std::numbers::pi) * total;
}

}  // namespace dirnet
