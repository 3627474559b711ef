// Command-line front end: `dirnet run --config FILE` or `dirnet <kind> ...`.
//
// Exit codes: 0 success, 1 numerical or internal failure, 2 invalid input
// (usage, parse or validation), 3 file I/O, 4 agreement violations under
// --strict. Failures print one JSON object on stderr.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "dirnet/dirnet.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> output;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  std::optional<double> radius;
  std::optional<double> power, noise, threshold, orthogonality, pathloss_exponent, pathloss_offset, density;
  std::optional<double> directivity, tx_directivity, rx_directivity;
  std::optional<int> lobes, tx_lobes, rx_lobes;
  std::optional<double> distance;
  std::optional<std::string> position_angle, orientation;
  std::vector<std::string> sweep;
  std::optional<std::string> metric;
  std::optional<double> agreement_k;
  bool no_analytic = false;
  bool no_monte_carlo = false;
  bool unit_fading = false;
  bool strict = false;
  std::optional<unsigned> workers;
};

void add_options(CLI::App& app, Overrides& o, bool config_required) {
  auto* config = app.add_option("-c,--config", o.config, "YAML experiment config");
  if (config_required) config->required();
  app.add_option("-o,--output", o.output, "CSV output path (metadata goes to <output>.meta.json)");
  app.add_option("--seed", o.seed, "master RNG seed");
  app.add_option("--trials", o.trials, "Monte Carlo trials per grid point");
  app.add_option("--radius", o.radius, "simulation disk radius");
  app.add_option("--power", o.power, "transmit power");
  app.add_option("--noise", o.noise, "noise power");
  app.add_option("--threshold", o.threshold, "SINR threshold");
  app.add_option("--orthogonality", o.orthogonality, "interference coupling factor in [0, 1]");
  app.add_option("--pathloss-exponent,--eta", o.pathloss_exponent, "path-loss exponent (> 2)");
  app.add_option("--pathloss-offset", o.pathloss_offset, "path-loss offset (>= 0)");
  app.add_option("--density", o.density, "node density");
  app.add_option("--directivity", o.directivity, "directivity of both antennas");
  app.add_option("--tx-directivity", o.tx_directivity, "transmitter directivity");
  app.add_option("--rx-directivity", o.rx_directivity, "receiver directivity");
  app.add_option("--lobes", o.lobes, "lobe count of both antennas");
  app.add_option("--tx-lobes", o.tx_lobes, "transmitter lobe count");
  app.add_option("--rx-lobes", o.rx_lobes, "receiver lobe count");
  app.add_option("--distance", o.distance, "tagged link distance");
  app.add_option("--position-angle", o.position_angle, "tagged transmitter position angle (radians, or e.g. 90deg)");
  app.add_option("--orientation", o.orientation, "tagged transmitter orientation (radians, or e.g. 180deg)");
  app.add_option("--sweep", o.sweep, "sweep axis: name=v1,v2,... or name=from:to:step (repeatable)");
  app.add_option("--metric", o.metric, "metric for kind sweep: wp, connection, rate or degree");
  app.add_option("--agreement-k", o.agreement_k, "agreement tolerance in standard errors");
  app.add_flag("--no-analytic", o.no_analytic, "skip the analytic column");
  app.add_flag("--no-monte-carlo", o.no_monte_carlo, "skip the Monte Carlo columns");
  app.add_flag("--unit-fading", o.unit_fading, "diagnostic: fix every fading gain to 1");
  app.add_flag("--strict", o.strict, "exit with status 4 when any row violates the agreement tolerance");
  app.add_option("--workers", o.workers, "worker threads (default: DIRNET_WORKERS or one per processor)");
}

double angle_argument(const std::string& text, const char* field) {
  const auto value = dirnet::parse_number(text, true);
  if (!value) throw dirnet::validation_error(field, "expected radians or a value with a deg suffix");
  return *value;
}

dirnet::ExperimentSpec build_spec(const Overrides& o, std::optional<dirnet::ExperimentKind> kind) {
  dirnet::ExperimentSpec spec;
  if (!o.config.empty()) {
    spec = dirnet::parse_config(o.config);
    if (kind && *kind != spec.kind) {
      spec.kind = *kind;
      if (*kind == dirnet::ExperimentKind::wp_curve) spec.include_monte_carlo = false;
    }
  } else {
    spec.kind = *kind;
    spec.include_monte_carlo = *kind != dirnet::ExperimentKind::wp_curve;
  }

  auto& sim = spec.simulation;
  auto& p = sim.params;
  if (o.output) spec.output_path = *o.output;
  if (o.seed) sim.rng_seed = *o.seed;
  if (o.trials) sim.trials = *o.trials;
  if (o.radius) sim.disk_radius = *o.radius;
  if (o.power) p.power = *o.power;
  if (o.noise) p.noise = *o.noise;
  if (o.threshold) p.threshold = *o.threshold;
  if (o.orthogonality) p.orthogonality = *o.orthogonality;
  if (o.pathloss_exponent) p.pathloss_exponent = *o.pathloss_exponent;
  if (o.pathloss_offset) p.pathloss_offset = *o.pathloss_offset;
  if (o.density) p.density = *o.density;
  if (o.directivity) sim.tx_pattern.directivity = sim.rx_pattern.directivity = *o.directivity;
  if (o.tx_directivity) sim.tx_pattern.directivity = *o.tx_directivity;
  if (o.rx_directivity) sim.rx_pattern.directivity = *o.rx_directivity;
  if (o.lobes) sim.tx_pattern.lobes = sim.rx_pattern.lobes = *o.lobes;
  if (o.tx_lobes) sim.tx_pattern.lobes = *o.tx_lobes;
  if (o.rx_lobes) sim.rx_pattern.lobes = *o.rx_lobes;
  if (o.distance) spec.link.distance = *o.distance;
  if (o.position_angle) spec.link.position_angle = angle_argument(*o.position_angle, "position_angle");
  if (o.orientation) spec.link.orientation = angle_argument(*o.orientation, "orientation");
  if (o.metric) {
    const auto metric = dirnet::parse_metric(*o.metric);
    if (!metric) throw dirnet::validation_error("metric", "metric must be wp, connection, rate or degree");
    spec.metric = *metric;
    if (*metric == dirnet::Metric::wp) spec.include_monte_carlo = false;
  }
  if (o.agreement_k) spec.agreement_k = *o.agreement_k;
  if (o.no_analytic) spec.include_analytic = false;
  if (o.no_monte_carlo) spec.include_monte_carlo = false;
  if (o.unit_fading) sim.unit_fading = true;
  if (o.workers) sim.workers = *o.workers;
  for (const auto& text : o.sweep) {
    auto axis = dirnet::parse_axis_argument(text);
    auto it = std::find_if(spec.sweep_axes.begin(), spec.sweep_axes.end(),
                           [&](const dirnet::SweepAxis& a) { return a.name == axis.name; });
    if (it != spec.sweep_axes.end()) *it = std::move(axis);
    else spec.sweep_axes.push_back(std::move(axis));
  }
  dirnet::apply_kind_defaults(spec);
  spec.validate();
  return spec;
}

void print_footer(const dirnet::ExperimentSpec& spec, const dirnet::ExperimentResult& result) {
  const auto& a = result.agreement;
  std::cout << "wrote " << result.table.rows.size() << " rows to " << spec.output_path << " (metadata: "
            << dirnet::metadata_path(spec.output_path) << ")\n";
  if (a.rows_compared == 0) {
    std::cout << "agreement: no rows with both analytic and Monte Carlo values\n";
    return;
  }
  std::cout << "agreement: " << a.rows_compared << " rows compared, k = " << dirnet::format_number(a.k)
            << ", max |analytic - mc| / tolerance = " << dirnet::format_number(a.max_normalized_deviation)
            << ", violations = " << a.violations.size() << "\n";
  constexpr std::size_t shown = 20;
  for (std::size_t i = 0; i < a.violations.size() && i < shown; ++i) {
    const auto& v = a.violations[i];
    std::cout << "  row " << v.row << ": analytic " << dirnet::format_number(v.analytic) << ", mc "
              << dirnet::format_number(v.estimate) << " +- " << dirnet::format_number(v.std_error)
              << ", tolerance " << dirnet::format_number(v.tolerance) << "\n";
  }
  if (a.violations.size() > shown) std::cout << "  ... " << a.violations.size() - shown << " more\n";
}

int report(const char* kind, const std::string& message, nlohmann::ordered_json extra, int code) {
  nlohmann::ordered_json line = {{"error", kind}};
  if (extra.is_object()) line.update(extra);
  line["message"] = message;
  std::cerr << line.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dirnet: link and degree statistics for Poisson networks with directional antennas"};
  app.require_subcommand(1);
  Overrides overrides;
  std::optional<dirnet::ExperimentKind> chosen;

  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  add_options(*run, overrides, true);
  run->callback([&] { chosen.reset(); });
  for (auto name : dirnet::kind_names) {
    auto* sub = app.add_subcommand(std::string(name), "run a " + std::string(name) + " experiment");
    add_options(*sub, overrides, false);
    const auto kind = *dirnet::parse_kind(name);
    sub->callback([&chosen, kind] { chosen = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report("usage", e.what(), {}, 2);
  }

  try {
    const auto spec = build_spec(overrides, chosen);
    const auto result = dirnet::run_experiment(spec);
    print_footer(spec, result);
    if (overrides.strict && !result.agreement.violations.empty()) return 4;
    return 0;
  } catch (const dirnet::validation_error& e) {
    nlohmann::ordered_json extra = {{"field", e.field()}};
    if (e.line() > 0) extra["line"] = e.line();
    return report("validation", e.what(), extra, 2);
  } catch (const dirnet::parse_error& e) {
    return report("parse", e.what(), {{"line", e.line()}}, 2);
  } catch (const dirnet::io_error& e) {
    return report("io", e.what(), {{"path", e.path()}}, 3);
  } catch (const dirnet::non_convergence_error& e) {
    return report("non_convergence", e.what(), {}, 1);
  } catch (const std::domain_error& e) {
    return report("domain", e.what(), {}, 1);
  } catch (const std::exception& e) {
    return report("internal", e.what(), {}, 1);
  }
}
