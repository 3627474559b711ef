#pragma once

// Physical model of the network: parameters, antenna gain pattern, path loss
// and the exact SINR of a tagged link in a given network realization.
//
// Frame convention: the receiver sits at the origin with boresight along the
// positive x-axis. A transmitter at polar position (t, theta) whose antenna
// points along phi is received with receiver gain G_rx(theta) and
// transmitter gain G_tx(theta + pi - phi).

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "dirnet/errors.hpp"

namespace dirnet {

struct SystemParams {
  double power = 1.0;              // transmit power, common to all nodes
  double noise = 1.0;              // long-time average noise power
  double threshold = 1.0;          // SINR decoding threshold q
  double orthogonality = 0.3;      // interference coupling gamma in [0, 1]
  double pathloss_exponent = 4.0;  // eta > 2
  double pathloss_offset = 0.0;    // epsilon >= 0
  double density = 1.0;            // nodes per unit area

  void validate() const {
    if (!(power > 0.0) || !std::isfinite(power)) throw validation_error("power", "power must be positive");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw validation_error("noise", "noise must be non-negative");
    if (!(threshold > 0.0) || !std::isfinite(threshold))
      throw validation_error("threshold", "threshold must be positive");
    if (!(orthogonality >= 0.0 && orthogonality <= 1.0))
      throw validation_error("orthogonality", "orthogonality must lie in [0, 1]");
    if (!(pathloss_exponent > 2.0) || !std::isfinite(pathloss_exponent))
      throw validation_error("pathloss_exponent", "pathloss_exponent (eta) must exceed 2");
    if (!(pathloss_offset >= 0.0) || !std::isfinite(pathloss_offset))
      throw validation_error("pathloss_offset", "pathloss_offset (epsilon) must be non-negative");
    if (!(density >= 0.0) || !std::isfinite(density))
      throw validation_error("density", "density must be non-negative");
  }

  bool operator==(const SystemParams&) const = default;
};

// Gain G(theta) = 1 + d cos(n theta). Integrates to 2 pi over one period.
struct AntennaPattern {
  double directivity = 0.0;
  int lobes = 1;

  static AntennaPattern isotropic() { return {}; }

  void validate() const {
    if (!(directivity >= 0.0 && directivity <= 1.0))
      throw validation_error("directivity", "directivity must lie in [0, 1]");
    if (lobes < 1) throw validation_error("lobes", "lobes must be a positive integer");
  }

  bool operator==(const AntennaPattern&) const = default;
};

struct LinkGeometry {
  double distance = 0.0;
  double position_angle = 0.0;
  double orientation = std::numbers::pi;

  bool operator==(const LinkGeometry&) const = default;
};

struct Interferer {
  double distance;
  double position_angle;
  double orientation;
  double fading;
};

struct NetworkRealization {
  std::vector<Interferer> interferers;
  LinkGeometry tagged_link;
  double tagged_fading = 1.0;
};

/// Antenna gain at an arbitrary (unreduced) angle.
inline double gain(const AntennaPattern& pattern, double angle) {
  return 1.0 + pattern.directivity * std::cos(pattern.lobes * angle);
}

inline double transmitter_gain(const AntennaPattern& tx, double position_angle, double orientation) {
  return gain(tx, position_angle + std::numbers::pi - orientation);
}

inline double receiver_gain(const AntennaPattern& rx, double position_angle) { return gain(rx, position_angle); }

/// Product G_tx * G_rx for a link of the given geometry.
inline double link_gain(const AntennaPattern& tx, const AntennaPattern& rx, const LinkGeometry& link) {
  return transmitter_gain(tx, link.position_angle, link.orientation) * receiver_gain(rx, link.position_angle);
}

/// Path loss 1 / (x^eta + epsilon).
inline double path_loss(const SystemParams& params, double x) {
  if (!(x >= 0.0)) throw domain_error("path_loss: distance must be non-negative");
  if (x == 0.0 && params.pathloss_offset == 0.0)
    throw singular_input_error("path_loss: zero distance with zero path-loss offset");
  return 1.0 / (std::pow(x, params.pathloss_exponent) + params.pathloss_offset);
}

/// Received power P |h|^2 g(t) G_tx G_rx of one transmitter at the origin.
inline double received_power(const SystemParams& params, const AntennaPattern& tx, const AntennaPattern& rx,
                             double distance, double position_angle, double orientation, double fading) {
  return params.power * fading * path_loss(params, distance) * transmitter_gain(tx, position_angle, orientation) *
         receiver_gain(rx, position_angle);
}

/// Aggregate interference I = P sum_k |h_k|^2 g(t_k) G_k Gbar_k.
inline double interference_power(const NetworkRealization& realization, const SystemParams& params,
                                 const AntennaPattern& tx, const AntennaPattern& rx) {
  double total = 0.0;
  for (const auto& k : realization.interferers)
    total += received_power(params, tx, rx, k.distance, k.position_angle, k.orientation, k.fading);
  return total;
}

inline double tagged_signal_power(const NetworkRealization& realization, const SystemParams& params,
                                  const AntennaPattern& tx, const AntennaPattern& rx) {
  const auto& link = realization.tagged_link;
  return received_power(params, tx, rx, link.distance, link.position_angle, link.orientation,
                        realization.tagged_fading);
}

/// signal / (N + gamma I). A zero denominator yields +inf for a positive
/// signal and 0 otherwise.
inline double sinr_from_powers(double signal, double interference, const SystemParams& params) {
  const double denominator = params.noise + params.orthogonality * interference;
  if (denominator == 0.0) return signal > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return signal / denominator;
}

/// Exact SINR of the tagged link against every interferer of the realization.
inline double sinr(const NetworkRealization& realization, const SystemParams& params, const AntennaPattern& tx_pattern,
                   const AntennaPattern& rx_pattern) {
  const double signal = tagged_signal_power(realization, params, tx_pattern, rx_pattern);
  const double interference = interference_power(realization, params, tx_pattern, rx_pattern);
  return sinr_from_powers(signal, interference, params);
}

}  // namespace dirnet
