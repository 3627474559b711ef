#pragma once

// Experiment descriptions, YAML configs, grid evaluation and CSV output.
//
// An experiment is a Cartesian grid over named axes (first axis outermost).
// Each grid point yields one row: the axis values, then the analytic value
// and the Monte Carlo estimate when requested.

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <json.hpp>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dirnet/analytic.hpp"
#include "dirnet/core_model.hpp"
#include "dirnet/errors.hpp"
#include "dirnet/montecarlo.hpp"

namespace dirnet {

enum class ExperimentKind {
  wp_curve,
  connection_vs_distance,
  connection_vs_orientation,
  rate_vs_distance,
  rate_vs_orientation,
  degree_vs_density,
  sweep,
};

enum class Metric { wp, connection, rate, degree };

inline constexpr std::string_view kind_names[] = {
    "wp-curve",          "connection-vs-distance", "connection-vs-orientation", "rate-vs-distance",
    "rate-vs-orientation", "degree-vs-density",    "sweep",
};
inline constexpr std::string_view metric_names[] = {"wp", "connection", "rate", "degree"};

inline std::string_view to_string(ExperimentKind kind) { return kind_names[static_cast<int>(kind)]; }
inline std::string_view to_string(Metric metric) { return metric_names[static_cast<int>(metric)]; }

inline std::optional<ExperimentKind> parse_kind(std::string_view text) {
  for (int i = 0; i < static_cast<int>(std::size(kind_names)); ++i)
    if (kind_names[i] == text) return static_cast<ExperimentKind>(i);
  return std::nullopt;
}

inline std::optional<Metric> parse_metric(std::string_view text) {
  for (int i = 0; i < static_cast<int>(std::size(metric_names)); ++i)
    if (metric_names[i] == text) return static_cast<Metric>(i);
  return std::nullopt;
}

/// Parameters a sweep axis may vary. "directivity" and "lobes" set both
/// antennas; the tx_/rx_ forms set one side.
inline const std::vector<std::string>& axis_names() {
  static const std::vector<std::string> names = {
      "distance",      "position_angle", "orientation",   "directivity",       "tx_directivity",
      "rx_directivity", "lobes",         "tx_lobes",      "rx_lobes",          "power",
      "noise",         "threshold",      "orthogonality", "pathloss_exponent", "pathloss_offset",
      "density",
  };
  return names;
}

inline bool is_angle_axis(std::string_view name) { return name == "position_angle" || name == "orientation"; }

struct SweepAxis {
  std::string name;
  std::vector<double> values;

  bool operator==(const SweepAxis&) const = default;
};

// Tagged-link fields left unset fall back to kind-specific rules.
struct LinkSpec {
  std::optional<double> distance;
  std::optional<double> position_angle;
  std::optional<double> orientation;

  bool operator==(const LinkSpec&) const = default;
};

/// The model defaults used throughout: P = N = rho = q = 1, gamma = 0.3,
/// epsilon = 0 and eta = 4.
inline SystemParams default_params() { return SystemParams{}; }

inline SimulationConfig default_simulation() {
  SimulationConfig sim;
  sim.disk_radius = 8.0;
  sim.trials = 30000;
  sim.rng_seed = 20240601;
  sim.params = default_params();
  return sim;
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::sweep;
  std::optional<Metric> metric;  // required for kind sweep, implied otherwise
  std::vector<SweepAxis> sweep_axes;
  std::string output_path;
  SimulationConfig simulation = default_simulation();
  LinkSpec link;
  bool include_monte_carlo = true;
  bool include_analytic = true;
  double agreement_k = 4.0;

  Metric resolved_metric() const {
    switch (kind) {
      case ExperimentKind::wp_curve: return Metric::wp;
      case ExperimentKind::connection_vs_distance:
      case ExperimentKind::connection_vs_orientation: return Metric::connection;
      case ExperimentKind::rate_vs_distance:
      case ExperimentKind::rate_vs_orientation: return Metric::rate;
      case ExperimentKind::degree_vs_density: return Metric::degree;
      case ExperimentKind::sweep: break;
    }
    if (!metric) throw validation_error("metric", "kind sweep requires a metric");
    return *metric;
  }

  const SweepAxis* find_axis(std::string_view name) const {
    for (const auto& axis : sweep_axes)
      if (axis.name == name) return &axis;
    return nullptr;
  }

  void validate() const;

  bool operator==(const ExperimentSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Grid expansion

struct GridPoint {
  std::vector<double> coordinates;  // one per axis, in axis order
  SimulationConfig simulation;
  LinkGeometry link;
};

namespace detail {

inline void apply_axis(const std::string& name, double value, SimulationConfig& sim, LinkGeometry& link) {
  auto as_lobes = [&](const std::string& field) {
    if (value != std::nearbyint(value) || value < 1.0 || value > 1e6)
      throw validation_error(field, "lobes must be a positive integer");
    return static_cast<int>(value);
  };
  auto& p = sim.params;
  if (name == "distance") link.distance = value;
  else if (name == "position_angle") link.position_angle = value;
  else if (name == "orientation") link.orientation = value;
  else if (name == "directivity") sim.tx_pattern.directivity = sim.rx_pattern.directivity = value;
  else if (name == "tx_directivity") sim.tx_pattern.directivity = value;
  else if (name == "rx_directivity") sim.rx_pattern.directivity = value;
  else if (name == "lobes") sim.tx_pattern.lobes = sim.rx_pattern.lobes = as_lobes(name);
  else if (name == "tx_lobes") sim.tx_pattern.lobes = as_lobes(name);
  else if (name == "rx_lobes") sim.rx_pattern.lobes = as_lobes(name);
  else if (name == "power") p.power = value;
  else if (name == "noise") p.noise = value;
  else if (name == "threshold") p.threshold = value;
  else if (name == "orthogonality") p.orthogonality = value;
  else if (name == "pathloss_exponent") p.pathloss_exponent = value;
  else if (name == "pathloss_offset") p.pathloss_offset = value;
  else if (name == "density") p.density = value;
  else throw validation_error("sweep", "unknown sweep axis '" + name + "'");
}

}  // namespace detail

/// All grid points in row order. Does not validate the resulting parameters.
inline std::vector<GridPoint> expand_grid(const ExperimentSpec& spec) {
  GridPoint base;
  base.simulation = spec.simulation;
  base.link.distance = spec.link.distance.value_or(0.0);
  base.link.position_angle = spec.link.position_angle.value_or(0.0);
  base.link.orientation = spec.link.orientation.value_or(std::numbers::pi);

  std::vector<GridPoint> points{base};
  for (const auto& axis : spec.sweep_axes) {
    std::vector<GridPoint> next;
    next.reserve(points.size() * axis.values.size());
    for (const auto& point : points) {
      for (double value : axis.values) {
        GridPoint p = point;
        p.coordinates.push_back(value);
        detail::apply_axis(axis.name, value, p.simulation, p.link);
        next.push_back(std::move(p));
      }
    }
    points = std::move(next);
  }
  return points;
}

inline void ExperimentSpec::validate() const {
  const Metric m = resolved_metric();
  if (kind != ExperimentKind::sweep && metric && *metric != m)
    throw validation_error("metric", "metric conflicts with kind " + std::string(to_string(kind)));
  if (!include_monte_carlo && !include_analytic)
    throw validation_error("include_analytic", "at least one of include_analytic and include_monte_carlo must be true");
  if (m == Metric::wp && include_monte_carlo)
    throw validation_error("include_monte_carlo", "wp-curve has no Monte Carlo estimator");
  if (!(agreement_k > 0.0) || !std::isfinite(agreement_k))
    throw validation_error("agreement_k", "agreement_k must be positive");
  if (output_path.empty()) throw validation_error("output", "output path is required");

  std::set<std::string> seen;
  for (const auto& axis : sweep_axes) {
    if (std::find(axis_names().begin(), axis_names().end(), axis.name) == axis_names().end())
      throw validation_error("sweep", "unknown sweep axis '" + axis.name + "'");
    if (!seen.insert(axis.name).second) throw validation_error("sweep", "duplicate sweep axis '" + axis.name + "'");
    if (axis.values.empty()) throw validation_error(axis.name, "sweep axis has no values");
    for (double v : axis.values)
      if (!std::isfinite(v)) throw validation_error(axis.name, "sweep values must be finite");
  }

  auto require_axis = [&](const char* name) {
    if (!find_axis(name))
      throw validation_error("sweep", std::string(to_string(kind)) + " requires a '" + name + "' sweep axis");
  };
  switch (kind) {
    case ExperimentKind::wp_curve: require_axis("directivity"); break;
    case ExperimentKind::connection_vs_distance:
    case ExperimentKind::rate_vs_distance:
      require_axis("distance");
      if (!link.orientation && !find_axis("orientation"))
        throw validation_error("orientation", std::string(to_string(kind)) + " requires the tagged orientation");
      break;
    case ExperimentKind::connection_vs_orientation:
    case ExperimentKind::rate_vs_orientation: require_axis("orientation"); break;
    case ExperimentKind::degree_vs_density: require_axis("density"); break;
    case ExperimentKind::sweep: break;
  }
  if ((m == Metric::connection || m == Metric::rate) && !link.distance && !find_axis("distance"))
    throw validation_error("distance", "the tagged link distance is required");

  if (!(simulation.disk_radius > 0.0) || !std::isfinite(simulation.disk_radius))
    throw validation_error("radius", "disk radius must be positive");
  if (simulation.trials < 1) throw validation_error("trials", "trials must be at least 1");

  for (const auto& point : expand_grid(*this)) {
    const auto& sim = point.simulation;
    sim.params.validate();
    sim.tx_pattern.validate();
    sim.rx_pattern.validate();
    if (m == Metric::wp) continue;
    if (sim.params.noise == 0.0 && sim.params.orthogonality == 0.0)
      throw validation_error("noise", "noise and orthogonality cannot both be zero");
    if (m == Metric::degree) continue;
    const double t = point.link.distance;
    if (!(t >= 0.0) || !std::isfinite(t)) throw validation_error("distance", "distance must be non-negative");
    if (t == 0.0 && sim.params.pathloss_offset == 0.0)
      throw validation_error("distance", "distance must be positive when pathloss_offset is zero");
    if (include_monte_carlo && !(t < sim.disk_radius))
      throw validation_error("distance", "distance must lie inside the simulation disk");
  }
}

// ---------------------------------------------------------------------------
// Parsing helpers shared by the config reader and the CLI

/// Parses a finite number; angles may carry a "deg" suffix.
inline std::optional<double> parse_number(std::string_view text, bool angle) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  bool degrees = false;
  if (angle && text.size() > 3 && text.substr(text.size() - 3) == "deg") {
    degrees = true;
    text.remove_suffix(3);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  if (degrees) value = value / 180.0 * std::numbers::pi;
  return value;
}

/// from, from + step, ... up to `to` inclusive (with a small tolerance).
inline std::vector<double> arithmetic_grid(double from, double to, double step) {
  if (!(step > 0.0)) throw validation_error("step", "step must be positive");
  if (!(to >= from)) throw validation_error("to", "'to' must not be below 'from'");
  const double span = (to - from) / step;
  if (span > 1e7) throw validation_error("step", "grid has too many points");
  const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = from + static_cast<double>(i) * step;
  return out;
}

/// "name=v1,v2,..." or "name=from:to:step".
inline SweepAxis parse_axis_argument(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw validation_error("sweep", "expected name=values, got '" + text + "'");
  SweepAxis axis;
  axis.name = text.substr(0, eq);
  const std::string body = text.substr(eq + 1);
  const bool angle = is_angle_axis(axis.name);
  auto number = [&](std::string_view s) {
    auto v = parse_number(s, angle);
    if (!v) throw validation_error(axis.name, "not a number: '" + std::string(s) + "'");
    return *v;
  };
  if (body.find(':') != std::string::npos) {
    std::vector<std::string_view> parts;
    std::string_view rest = body;
    for (auto pos = rest.find(':'); pos != std::string_view::npos; pos = rest.find(':')) {
      parts.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    parts.push_back(rest);
    if (parts.size() != 3) throw validation_error(axis.name, "range must be from:to:step");
    axis.values = arithmetic_grid(number(parts[0]), number(parts[1]), number(parts[2]));
  } else {
    std::string_view rest = body;
    for (;;) {
      const auto pos = rest.find(',');
      axis.values.push_back(number(rest.substr(0, pos)));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
  }
  return axis;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

/// Fills in the grid a kind needs when the config leaves it out: directivity
/// 0..1 for wp-curve, distance 0.02..1 for the distance kinds, a 5 degree
/// orientation grid at distance 0.4 for the orientation kinds and density
/// 0.25..5 for degree-vs-density. The orientation of the distance kinds has
/// no default.
inline void apply_kind_defaults(ExperimentSpec& spec) {
  auto ensure_axis = [&](const char* name, std::vector<double> values) {
    if (!spec.find_axis(name)) spec.sweep_axes.push_back({name, std::move(values)});
  };
  switch (spec.kind) {
    case ExperimentKind::wp_curve: ensure_axis("directivity", arithmetic_grid(0.0, 1.0, 0.05)); break;
    case ExperimentKind::connection_vs_distance:
    case ExperimentKind::rate_vs_distance: ensure_axis("distance", arithmetic_grid(0.02, 1.0, 0.02)); break;
    case ExperimentKind::connection_vs_orientation:
    case ExperimentKind::rate_vs_orientation: {
      std::vector<double> grid(72);
      for (int i = 0; i < 72; ++i) grid[i] = i / 36.0 * std::numbers::pi;
      ensure_axis("orientation", std::move(grid));
      if (!spec.link.distance && !spec.find_axis("distance")) spec.link.distance = 0.4;
      break;
    }
    case ExperimentKind::degree_vs_density: ensure_axis("density", arithmetic_grid(0.25, 5.0, 0.25)); break;
    case ExperimentKind::sweep: break;
  }
}

// ---------------------------------------------------------------------------
// YAML config

namespace detail {

inline int line_of(const YAML::Node& node) { return node.Mark().line >= 0 ? node.Mark().line + 1 : 0; }

inline void check_keys(const YAML::Node& node, std::initializer_list<std::string_view> allowed,
                       const std::string& section) {
  if (!node.IsMap()) throw parse_error(line_of(node), "section '" + section + "' must be a mapping");
  for (const auto& entry : node) {
    const auto key = entry.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw parse_error(line_of(entry.first), "unknown key '" + key + "' in " + section);
  }
}

struct config_reader {
  std::map<std::string, int> field_lines;

  std::string scalar(const YAML::Node& node, const std::string& field) {
    if (!node.IsScalar()) throw validation_error(field, "expected a scalar value", line_of(node));
    field_lines.emplace(field, line_of(node));
    return node.Scalar();
  }

  double number(const YAML::Node& node, const std::string& field, bool angle = false) {
    auto v = parse_number(scalar(node, field), angle);
    if (!v) throw validation_error(field, "expected a finite number", line_of(node));
    return *v;
  }

  std::uint64_t count(const YAML::Node& node, const std::string& field) {
    const std::string text = scalar(node, field);
    std::uint64_t value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size())
      throw validation_error(field, "expected a non-negative integer", line_of(node));
    return value;
  }

  int lobes(const YAML::Node& node, const std::string& field) {
    const auto value = count(node, field);
    if (value < 1 || value > 1000000) throw validation_error(field, "lobes must be a positive integer", line_of(node));
    return static_cast<int>(value);
  }

  bool boolean(const YAML::Node& node, const std::string& field) {
    const std::string text = scalar(node, field);
    if (text == "true") return true;
    if (text == "false") return false;
    throw validation_error(field, "expected true or false", line_of(node));
  }

  void pattern(const YAML::Node& node, AntennaPattern& out, const std::string& prefix) {
    check_keys(node, {"directivity", "lobes"}, "antenna." + prefix);
    if (node["directivity"]) out.directivity = number(node["directivity"], prefix + "_directivity");
    if (node["lobes"]) out.lobes = lobes(node["lobes"], prefix + "_lobes");
  }

  SweepAxis axis(const YAML::Node& node) {
    if (!node.IsMap()) throw parse_error(line_of(node), "sweep entries must be mappings");
    check_keys(node, {"name", "values", "from", "to", "step", "count"}, "sweep entry");
    if (!node["name"]) throw validation_error("sweep", "sweep entry needs a name", line_of(node));
    SweepAxis axis;
    axis.name = scalar(node["name"], "sweep");
    const bool angle = is_angle_axis(axis.name);
    const int line = line_of(node);
    if (node["values"]) {
      if (node["from"] || node["to"] || node["step"] || node["count"])
        throw validation_error(axis.name, "give either values or a from/to range", line);
      const auto& values = node["values"];
      if (!values.IsSequence()) throw validation_error(axis.name, "values must be a list", line_of(values));
      for (const auto& v : values) axis.values.push_back(number(v, axis.name, angle));
    } else {
      if (!node["from"] || !node["to"] || (!node["step"] == !node["count"]))
        throw validation_error(axis.name, "range needs from, to and exactly one of step or count", line);
      const double from = number(node["from"], axis.name, angle);
      const double to = number(node["to"], axis.name, angle);
      try {
        if (node["step"]) {
          axis.values = arithmetic_grid(from, to, number(node["step"], axis.name, angle));
        } else {
          const auto n = count(node["count"], axis.name);
          if (n < 1 || n > 10000000) throw validation_error(axis.name, "count must be at least 1");
          if (n == 1 && from != to) throw validation_error(axis.name, "count 1 needs from == to");
          for (std::uint64_t i = 0; i < n; ++i)
            axis.values.push_back(n == 1 ? from
                                         : from + (to - from) * static_cast<double>(i) / static_cast<double>(n - 1));
        }
      } catch (const validation_error& e) {
        throw validation_error(axis.name, e.what(), line);
      }
    }
    field_lines.emplace(axis.name, line);
    return axis;
  }

  ExperimentSpec read(const YAML::Node& root) {
    if (!root.IsMap()) throw parse_error(line_of(root), "config must be a mapping");
    check_keys(root,
               {"kind", "metric", "output", "include_analytic", "include_monte_carlo", "agreement_k", "params",
                "antenna", "simulation", "link", "sweep"},
               "config");
    ExperimentSpec spec;
    if (!root["kind"]) throw validation_error("kind", "kind is required", line_of(root));
    const auto kind = parse_kind(scalar(root["kind"], "kind"));
    if (!kind) throw validation_error("kind", "unknown experiment kind", line_of(root["kind"]));
    spec.kind = *kind;
    if (root["metric"]) {
      const auto metric = parse_metric(scalar(root["metric"], "metric"));
      if (!metric) throw validation_error("metric", "metric must be wp, connection, rate or degree", line_of(root["metric"]));
      spec.metric = *metric;
    }
    if (root["output"]) spec.output_path = scalar(root["output"], "output");
    if (root["include_analytic"]) spec.include_analytic = boolean(root["include_analytic"], "include_analytic");
    // The gain integral has no simulation counterpart, so it defaults to analytic only.
    spec.include_monte_carlo = spec.kind != ExperimentKind::wp_curve && spec.metric != Metric::wp;
    if (root["include_monte_carlo"])
      spec.include_monte_carlo = boolean(root["include_monte_carlo"], "include_monte_carlo");
    if (root["agreement_k"]) spec.agreement_k = number(root["agreement_k"], "agreement_k");

    auto& sim = spec.simulation;
    if (const auto& params = root["params"]) {
      check_keys(params,
                 {"power", "noise", "threshold", "orthogonality", "pathloss_exponent", "pathloss_offset", "density"},
                 "params");
      auto read = [&](const char* key, double& target) {
        if (params[key]) target = number(params[key], key);
      };
      read("power", sim.params.power);
      read("noise", sim.params.noise);
      read("threshold", sim.params.threshold);
      read("orthogonality", sim.params.orthogonality);
      read("pathloss_exponent", sim.params.pathloss_exponent);
      read("pathloss_offset", sim.params.pathloss_offset);
      read("density", sim.params.density);
    }
    if (const auto& antenna = root["antenna"]) {
      check_keys(antenna, {"directivity", "lobes", "tx", "rx"}, "antenna");
      if (antenna["directivity"])
        sim.tx_pattern.directivity = sim.rx_pattern.directivity = number(antenna["directivity"], "directivity");
      if (antenna["lobes"]) sim.tx_pattern.lobes = sim.rx_pattern.lobes = lobes(antenna["lobes"], "lobes");
      if (antenna["tx"]) pattern(antenna["tx"], sim.tx_pattern, "tx");
      if (antenna["rx"]) pattern(antenna["rx"], sim.rx_pattern, "rx");
    }
    if (const auto& s = root["simulation"]) {
      check_keys(s, {"radius", "trials", "seed", "unit_fading"}, "simulation");
      if (s["radius"]) sim.disk_radius = number(s["radius"], "radius");
      if (s["trials"]) sim.trials = count(s["trials"], "trials");
      if (s["seed"]) sim.rng_seed = count(s["seed"], "seed");
      if (s["unit_fading"]) sim.unit_fading = boolean(s["unit_fading"], "unit_fading");
    }
    if (const auto& link = root["link"]) {
      check_keys(link, {"distance", "position_angle", "orientation"}, "link");
      if (link["distance"]) spec.link.distance = number(link["distance"], "distance");
      if (link["position_angle"]) spec.link.position_angle = number(link["position_angle"], "position_angle", true);
      if (link["orientation"]) spec.link.orientation = number(link["orientation"], "orientation", true);
    }
    if (const auto& sweep = root["sweep"]) {
      if (!sweep.IsSequence()) throw parse_error(line_of(sweep), "sweep must be a list of axes");
      field_lines.emplace("sweep", line_of(sweep));
      for (const auto& entry : sweep) spec.sweep_axes.push_back(axis(entry));
    }
    return spec;
  }

  int line_for(const std::string& field) const {
    if (auto it = field_lines.find(field); it != field_lines.end()) return it->second;
    // tx_/rx_ fields fall back to the shared antenna keys.
    for (const char* prefix : {"tx_", "rx_"})
      if (field.rfind(prefix, 0) == 0)
        if (auto it = field_lines.find(field.substr(3)); it != field_lines.end()) return it->second;
    return 0;
  }
};

}  // namespace detail

/// Reads and validates a YAML config held in memory.
inline ExperimentSpec parse_config_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw parse_error(e.mark.line + 1, e.msg);
  }
  detail::config_reader reader;
  ExperimentSpec spec;
  try {
    spec = reader.read(root);
  } catch (const YAML::Exception& e) {
    throw parse_error(e.mark.line + 1, e.msg);
  }
  apply_kind_defaults(spec);
  try {
    spec.validate();
  } catch (const validation_error& e) {
    if (e.line() != 0) throw;
    throw validation_error(e.field(), e.what(), reader.line_for(e.field()));
  }
  return spec;
}

inline ExperimentSpec parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path, "cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_string(text.str());
}

/// YAML text that parse_config_string maps back to an identical spec.
inline std::string serialize_config(const ExperimentSpec& spec) {
  YAML::Emitter out;
  auto num = [](double v) { return format_number(v); };
  out << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << std::string(to_string(spec.kind));
  if (spec.metric) out << YAML::Key << "metric" << YAML::Value << std::string(to_string(*spec.metric));
  out << YAML::Key << "output" << YAML::Value << YAML::DoubleQuoted << spec.output_path;
  out << YAML::Key << "include_analytic" << YAML::Value << (spec.include_analytic ? "true" : "false");
  out << YAML::Key << "include_monte_carlo" << YAML::Value << (spec.include_monte_carlo ? "true" : "false");
  out << YAML::Key << "agreement_k" << YAML::Value << num(spec.agreement_k);

  const auto& sim = spec.simulation;
  const auto& p = sim.params;
  out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "power" << YAML::Value << num(p.power);
  out << YAML::Key << "noise" << YAML::Value << num(p.noise);
  out << YAML::Key << "threshold" << YAML::Value << num(p.threshold);
  out << YAML::Key << "orthogonality" << YAML::Value << num(p.orthogonality);
  out << YAML::Key << "pathloss_exponent" << YAML::Value << num(p.pathloss_exponent);
  out << YAML::Key << "pathloss_offset" << YAML::Value << num(p.pathloss_offset);
  out << YAML::Key << "density" << YAML::Value << num(p.density);
  out << YAML::EndMap;

  auto pattern = [&](const char* key, const AntennaPattern& a) {
    out << YAML::Key << key << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "directivity" << YAML::Value << num(a.directivity);
    out << YAML::Key << "lobes" << YAML::Value << a.lobes;
    out << YAML::EndMap;
  };
  out << YAML::Key << "antenna" << YAML::Value << YAML::BeginMap;
  pattern("tx", sim.tx_pattern);
  pattern("rx", sim.rx_pattern);
  out << YAML::EndMap;

  out << YAML::Key << "simulation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "radius" << YAML::Value << num(sim.disk_radius);
  out << YAML::Key << "trials" << YAML::Value << sim.trials;
  out << YAML::Key << "seed" << YAML::Value << sim.rng_seed;
  out << YAML::Key << "unit_fading" << YAML::Value << (sim.unit_fading ? "true" : "false");
  out << YAML::EndMap;

  if (spec.link.distance || spec.link.position_angle || spec.link.orientation) {
    out << YAML::Key << "link" << YAML::Value << YAML::BeginMap;
    if (spec.link.distance) out << YAML::Key << "distance" << YAML::Value << num(*spec.link.distance);
    if (spec.link.position_angle)
      out << YAML::Key << "position_angle" << YAML::Value << num(*spec.link.position_angle);
    if (spec.link.orientation) out << YAML::Key << "orientation" << YAML::Value << num(*spec.link.orientation);
    out << YAML::EndMap;
  }

  if (!spec.sweep_axes.empty()) {
    out << YAML::Key << "sweep" << YAML::Value << YAML::BeginSeq;
    for (const auto& axis : spec.sweep_axes) {
      out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << axis.name;
      out << YAML::Key << "values" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (double v : axis.values) out << num(v);
      out << YAML::EndSeq << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// Evaluation

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;

  std::size_t column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw std::out_of_range("no column " + std::string(name));
  }
};

struct AgreementViolation {
  std::size_t row = 0;
  double analytic = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  double tolerance = 0.0;
};

/// Rows carrying both an analytic value and an estimate are compared with
/// tolerance k * std_error + 1 / trials. The 1/trials floor keeps a
/// zero-variance estimate (all trials succeed or all fail) from demanding
/// exact equality.
struct AgreementSummary {
  double k = 4.0;
  std::size_t rows_compared = 0;
  double max_normalized_deviation = 0.0;  // max |analytic - estimate| / tolerance
  std::vector<AgreementViolation> violations;
};

struct ExperimentResult {
  ResultTable table;
  AgreementSummary agreement;
};

namespace detail {

inline double analytic_value(Metric metric, const GridPoint& point) {
  const auto& sim = point.simulation;
  const auto& p = sim.params;
  switch (metric) {
    case Metric::wp: return wp(p.pathloss_exponent, sim.tx_pattern.directivity);
    case Metric::connection: return connection_probability(p, point.link, sim.tx_pattern, sim.rx_pattern);
    case Metric::rate: return data_rate(p, point.link, sim.tx_pattern, sim.rx_pattern);
    case Metric::degree:
      if (p.pathloss_exponent == 4.0 && p.pathloss_offset == 0.0 && p.orthogonality > 0.0 &&
          sim.tx_pattern.directivity == sim.rx_pattern.directivity)
        return mean_degree_closed_form(p, sim.tx_pattern.directivity);
      return mean_degree_numeric(p, sim.tx_pattern, sim.rx_pattern, QuadratureSpec{1e-10, 1e-8, 2000});
  }
  return 0.0;
}

inline bool has_analytic(Metric metric, const GridPoint& point) {
  return metric != Metric::degree || point.simulation.params.pathloss_offset == 0.0;
}

}  // namespace detail

/// Evaluates every grid point. Link metrics for points that share a
/// simulation config are estimated in one batch over shared realizations.
inline ExperimentResult compute_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const Metric metric = spec.resolved_metric();
  const auto points = expand_grid(spec);

  ExperimentResult result;
  auto& table = result.table;
  for (const auto& axis : spec.sweep_axes) table.columns.push_back(axis.name);
  const std::size_t axes = spec.sweep_axes.size();
  std::optional<std::size_t> analytic_col, estimate_col;
  if (spec.include_analytic) {
    analytic_col = table.columns.size();
    table.columns.push_back("analytic");
  }
  if (spec.include_monte_carlo) {
    estimate_col = table.columns.size();
    table.columns.insert(table.columns.end(), {"mc_estimate", "mc_std_error", "trials"});
    if (metric == Metric::degree) table.columns.insert(table.columns.end(), {"mc_fraction", "mc_fraction_std_error"});
  }

  table.rows.assign(points.size(), std::vector<std::optional<double>>(table.columns.size()));
  for (std::size_t r = 0; r < points.size(); ++r) {
    for (std::size_t a = 0; a < axes; ++a) table.rows[r][a] = points[r].coordinates[a];
    if (analytic_col && detail::has_analytic(metric, points[r]))
      table.rows[r][*analytic_col] = detail::analytic_value(metric, points[r]);
  }

  if (estimate_col) {
    auto store = [&](std::size_t r, const EstimateWithError& e) {
      table.rows[r][*estimate_col] = e.estimate;
      table.rows[r][*estimate_col + 1] = e.std_error;
      table.rows[r][*estimate_col + 2] = static_cast<double>(e.trials_used);
    };
    if (metric == Metric::degree) {
      for (std::size_t r = 0; r < points.size(); ++r) {
        const auto e = estimate_mean_degree_detailed(points[r].simulation);
        store(r, e.count);
        if (e.fraction.trials_used > 0) {
          table.rows[r][*estimate_col + 3] = e.fraction.estimate;
          table.rows[r][*estimate_col + 4] = e.fraction.std_error;
        }
      }
    } else {
      std::vector<bool> done(points.size(), false);
      for (std::size_t r = 0; r < points.size(); ++r) {
        if (done[r]) continue;
        std::vector<std::size_t> members;
        std::vector<LinkGeometry> links;
        for (std::size_t s = r; s < points.size(); ++s) {
          if (!done[s] && points[s].simulation == points[r].simulation) {
            members.push_back(s);
            links.push_back(points[s].link);
            done[s] = true;
          }
        }
        const auto estimates = estimate_link_metrics(points[r].simulation, links);
        for (std::size_t i = 0; i < members.size(); ++i)
          store(members[i], metric == Metric::connection ? estimates[i].connection : estimates[i].rate);
      }
    }
  }

  auto& agreement = result.agreement;
  agreement.k = spec.agreement_k;
  if (analytic_col && estimate_col) {
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      if (!row[*analytic_col] || !row[*estimate_col]) continue;
      const double analytic = *row[*analytic_col];
      const double estimate = *row[*estimate_col];
      const double se = *row[*estimate_col + 1];
      const double tolerance = spec.agreement_k * se + 1.0 / *row[*estimate_col + 2];
      const double deviation = std::abs(analytic - estimate) / tolerance;
      ++agreement.rows_compared;
      agreement.max_normalized_deviation = std::max(agreement.max_normalized_deviation, deviation);
      if (!(deviation <= 1.0)) agreement.violations.push_back({r, analytic, estimate, se, tolerance});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Output

inline std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// One header line, then one line per row; empty cells for missing values.
inline std::string to_csv(const ResultTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ',';
    out += csv_quote(table.columns[i]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      if (row[i]) out += format_number(*row[i]);
    }
    out += '\n';
  }
  return out;
}

inline nlohmann::ordered_json metadata_json(const ExperimentSpec& spec, const ExperimentResult& result) {
  nlohmann::ordered_json meta;
  meta["config_yaml"] = serialize_config(spec);
  const auto& sim = spec.simulation;
  meta["parameters"] = {
      {"power", sim.params.power},
      {"noise", sim.params.noise},
      {"threshold", sim.params.threshold},
      {"orthogonality", sim.params.orthogonality},
      {"pathloss_exponent", sim.params.pathloss_exponent},
      {"pathloss_offset", sim.params.pathloss_offset},
      {"density", sim.params.density},
      {"tx_directivity", sim.tx_pattern.directivity},
      {"tx_lobes", sim.tx_pattern.lobes},
      {"rx_directivity", sim.rx_pattern.directivity},
      {"rx_lobes", sim.rx_pattern.lobes},
  };
  meta["simulation"] = {
      {"radius", sim.disk_radius},
      {"trials", sim.trials},
      {"seed", sim.rng_seed},
      {"unit_fading", sim.unit_fading},
      {"generator", "mt19937_64 per trial, seeded by SplitMix64(seed + (trial + 1) * 0x9E3779B97F4A7C15)"},
      {"block_size", trial_block_size},
  };
  meta["columns"] = result.table.columns;
  meta["rows"] = result.table.rows.size();
  nlohmann::ordered_json violations = nlohmann::ordered_json::array();
  for (const auto& v : result.agreement.violations)
    violations.push_back({{"row", v.row},
                          {"analytic", v.analytic},
                          {"estimate", v.estimate},
                          {"std_error", v.std_error},
                          {"tolerance", v.tolerance}});
  meta["agreement"] = {
      {"k", result.agreement.k},
      {"rows_compared", result.agreement.rows_compared},
      {"max_normalized_deviation", result.agreement.max_normalized_deviation},
      {"violations", violations},
  };
  return meta;
}

inline std::string metadata_path(const std::string& output_path) { return output_path + ".meta.json"; }

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error(path, "cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw io_error(path, "write failed");
}

/// Computes the experiment and writes the CSV plus its metadata sidecar.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  auto result = compute_experiment(spec);
  write_text_file(spec.output_path, to_csv(result.table));
  write_text_file(metadata_path(spec.output_path), metadata_json(spec, result).dump(2) + "\n");
  return result;
}

}  // namespace dirnet
