#pragma once

// Monte Carlo estimators on a finite disk.
//
// Reproducibility contract: trial j of a run with master seed S draws from a
// std::mt19937_64 seeded with splitmix64_mix(S + (j + 1) * 0x9E3779B97F4A7C15),
// i.e. the (j+1)-th output of a SplitMix64 sequence started at S. Trials are
// grouped in fixed blocks of `trial_block_size`, each block is reduced in
// trial order and blocks are merged in index order, so estimates are
// bit-identical for any worker count.
//
// Every estimator call with the same config replays the same trial streams.
// Sweeping a link or model parameter therefore reuses common random numbers
// across grid points.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dirnet/core_model.hpp"
#include "dirnet/errors.hpp"

namespace dirnet {

struct SimulationConfig {
  double disk_radius = 8.0;
  std::uint64_t trials = 30000;
  std::uint64_t rng_seed = 1;
  SystemParams params;
  AntennaPattern tx_pattern;
  AntennaPattern rx_pattern;
  bool unit_fading = false;  // diagnostic mode: every |h|^2 is exactly 1
  unsigned workers = 0;      // 0 = DIRNET_WORKERS, else one per hardware thread

  void validate() const {
    if (!(disk_radius > 0.0) || !std::isfinite(disk_radius))
      throw validation_error("radius", "disk radius must be positive");
    if (trials < 1) throw validation_error("trials", "trials must be at least 1");
    params.validate();
    tx_pattern.validate();
    rx_pattern.validate();
  }

  bool operator==(const SimulationConfig&) const = default;
};

struct EstimateWithError {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t trials_used = 0;
};

struct LinkEstimates {
  EstimateWithError connection;
  EstimateWithError rate;
};

struct DegreeEstimates {
  EstimateWithError count;     // successful transmitters per realization
  EstimateWithError fraction;  // successes / transmitters, over non-empty realizations
};

using TrialEngine = std::mt19937_64;

inline constexpr std::uint64_t trial_block_size = 512;

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial) {
  return splitmix64_mix(master_seed + (trial + 1) * 0x9E3779B97F4A7C15ULL);
}

/// Uniform on the open interval (0, 1) with 53 random bits.
inline double uniform_open(TrialEngine& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

/// Exponential with unit mean; strictly positive.
inline double unit_exponential(TrialEngine& rng) { return -std::log(uniform_open(rng)); }

/// One Poisson realization of interferers on the disk, plus the tagged
/// link's fading. Points are generated outward by distance: the swept areas
/// pi r_k^2 form a Poisson process of rate rho, so the count is Poisson with
/// mean rho pi R^2 and positions are uniform on the disk. Orientations are
/// uniform on [0, 2 pi). The tagged fading is drawn first, so a realization
/// on a larger disk extends the one on a smaller disk under the same stream.
inline NetworkRealization sample_realization(const SimulationConfig& config, const LinkGeometry& tagged,
                                             TrialEngine& rng) {
  if (!(tagged.distance < config.disk_radius))
    throw domain_error("sample_realization: tagged link must lie inside the simulation disk");
  NetworkRealization realization;
  realization.tagged_link = tagged;
  const double tagged_fading = unit_exponential(rng);
  realization.tagged_fading = config.unit_fading ? 1.0 : tagged_fading;

  const double density = config.params.density;
  if (density <= 0.0) return realization;
  const double two_pi = 2.0 * std::numbers::pi;
  const double disk_area = std::numbers::pi * config.disk_radius * config.disk_radius;
  realization.interferers.reserve(static_cast<std::size_t>(density * disk_area * 1.2) + 8);
  double swept_area = 0.0;
  for (;;) {
    swept_area += unit_exponential(rng) / density;
    if (swept_area > disk_area) break;
    Interferer k;
    k.distance = std::sqrt(swept_area / std::numbers::pi);
    k.position_angle = two_pi * uniform_open(rng);
    k.orientation = two_pi * uniform_open(rng);
    const double fading = unit_exponential(rng);
    k.fading = config.unit_fading ? 1.0 : fading;
    realization.interferers.push_back(k);
  }
  return realization;
}

namespace detail {

// Welford accumulator with Chan's pairwise merge.
struct running_stats {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }

  void merge(const running_stats& other) {
    if (other.n == 0) return;
    if (n == 0) {
      *this = other;
      return;
    }
    const double total = static_cast<double>(n + other.n);
    const double delta = other.mean - mean;
    mean += delta * static_cast<double>(other.n) / total;
    m2 += other.m2 + delta * delta * static_cast<double>(n) * static_cast<double>(other.n) / total;
    n += other.n;
  }

  EstimateWithError result() const {
    EstimateWithError e;
    e.estimate = mean;
    e.trials_used = n;
    e.std_error = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    return e;
  }
};

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DIRNET_WORKERS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) return static_cast<unsigned>(value);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs config.trials trials. `trial(rng, acc)` folds one trial into a block
// accumulator; `merge(into, from)` combines blocks in index order.
template <typename Accumulator, typename Trial, typename Merge>
Accumulator run_trials(const SimulationConfig& config, const Accumulator& empty, Trial&& trial, Merge&& merge) {
  const std::uint64_t blocks = (config.trials + trial_block_size - 1) / trial_block_size;
  std::vector<Accumulator> partial(blocks, empty);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    try {
      for (;;) {
        const std::uint64_t b = next.fetch_add(1);
        if (b >= blocks) return;
        const std::uint64_t first = b * trial_block_size;
        const std::uint64_t last = std::min(config.trials, first + trial_block_size);
        for (std::uint64_t j = first; j < last; ++j) {
          TrialEngine rng(trial_seed(config.rng_seed, j));
          trial(rng, partial[b]);
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(blocks);
    }
  };

  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(resolve_workers(config.workers), blocks));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  Accumulator total = empty;
  for (const auto& p : partial) merge(total, p);
  return total;
}

struct link_accumulator {
  std::vector<running_stats> connection;
  std::vector<running_stats> rate;
};

}  // namespace detail

/// Connection and rate estimates for several tagged links sharing each
/// sampled realization. Each link's estimate is identical to a separate
/// single-link run with the same config.
inline std::vector<LinkEstimates> estimate_link_metrics(const SimulationConfig& config,
                                                        std::span<const LinkGeometry> links) {
  config.validate();
  for (const auto& link : links) {
    if (!(link.distance >= 0.0 && link.distance < config.disk_radius))
      throw validation_error("distance", "tagged distance must lie in [0, radius)");
    if (link.distance == 0.0 && config.params.pathloss_offset == 0.0)
      throw singular_input_error("tagged transmitter at the origin with zero path-loss offset");
  }
  const auto& params = config.params;
  const LinkGeometry placeholder = links.empty() ? LinkGeometry{} : links.front();

  detail::link_accumulator empty;
  empty.connection.resize(links.size());
  empty.rate.resize(links.size());

  auto trial = [&](TrialEngine& rng, detail::link_accumulator& acc) {
    NetworkRealization realization = sample_realization(config, placeholder, rng);
    const double interference = interference_power(realization, params, config.tx_pattern, config.rx_pattern);
    for (std::size_t i = 0; i < links.size(); ++i) {
      realization.tagged_link = links[i];
      const double signal = tagged_signal_power(realization, params, config.tx_pattern, config.rx_pattern);
      const double s = sinr_from_powers(signal, interference, params);
      acc.connection[i].add(s >= params.threshold ? 1.0 : 0.0);
      acc.rate[i].add(std::log1p(s));
    }
  };
  auto merge = [](detail::link_accumulator& into, const detail::link_accumulator& from) {
    for (std::size_t i = 0; i < into.connection.size(); ++i) {
      into.connection[i].merge(from.connection[i]);
      into.rate[i].merge(from.rate[i]);
    }
  };

  const auto total = detail::run_trials(config, empty, trial, merge);
  std::vector<LinkEstimates> out(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    out[i].connection = total.connection[i].result();
    out[i].rate = total.rate[i].result();
  }
  return out;
}

/// Fraction of trials with SINR >= q, with its standard error.
inline EstimateWithError estimate_connection_probability(const SimulationConfig& config, const LinkGeometry& tagged) {
  return estimate_link_metrics(config, std::span<const LinkGeometry>(&tagged, 1)).front().connection;
}

/// Sample mean of ln(1 + SINR), in nats.
inline EstimateWithError estimate_data_rate(const SimulationConfig& config, const LinkGeometry& tagged) {
  return estimate_link_metrics(config, std::span<const LinkGeometry>(&tagged, 1)).front().rate;
}

/// Per realization, every transmitter in the disk is tested against the
/// origin receiver with all other transmitters as interference. `count` is the
/// mean number of successes; `fraction` divides by the number of transmitters.
inline DegreeEstimates estimate_mean_degree_detailed(const SimulationConfig& config) {
  config.validate();
  const auto& params = config.params;
  struct accumulator {
    detail::running_stats count;
    detail::running_stats fraction;
  };
  std::vector<double> received;
  auto trial = [&](TrialEngine& rng, accumulator& acc) {
    const NetworkRealization realization = sample_realization(config, LinkGeometry{}, rng);
    double total = 0.0;
    thread_local std::vector<double> powers;
    powers.clear();
    for (const auto& k : realization.interferers) {
      const double p = received_power(params, config.tx_pattern, config.rx_pattern, k.distance, k.position_angle,
                                      k.orientation, k.fading);
      powers.push_back(p);
      total += p;
    }
    std::uint64_t successes = 0;
    for (double p : powers)
      if (sinr_from_powers(p, total - p, params) >= params.threshold) ++successes;
    acc.count.add(static_cast<double>(successes));
    if (!powers.empty()) acc.fraction.add(static_cast<double>(successes) / static_cast<double>(powers.size()));
  };
  auto merge = [](accumulator& into, const accumulator& from) {
    into.count.merge(from.count);
    into.fraction.merge(from.fraction);
  };
  const auto total = detail::run_trials(config, accumulator{}, trial, merge);
  return {total.count.result(), total.fraction.result()};
}

/// Mean number of successful transmitters per realization.
inline EstimateWithError estimate_mean_degree(const SimulationConfig& config) {
  return estimate_mean_degree_detailed(config).count;
}

}  // namespace dirnet
