#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "dirnet/experiments.hpp"

using dirnet::ExperimentKind;
using dirnet::ExperimentSpec;

namespace {

constexpr double pi = std::numbers::pi;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "dirnet_experiment_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

template <typename Error>
Error expect_error(const std::string& yaml) {
  try {
    dirnet::parse_config_string(yaml);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected an error for:\n" << yaml;
  throw std::runtime_error("no error");
}

ExperimentSpec small_connection_spec() {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::connection_vs_distance;
  spec.output_path = (scratch_dir() / "small.csv").string();
  spec.simulation.trials = 3000;
  spec.link.orientation = pi;
  spec.sweep_axes = {{"directivity", {0.0, 1.0}}, {"distance", {0.2, 0.5}}};
  return spec;
}

}  // namespace

TEST(DefaultParams, ModelDefaults) {
  const auto p = dirnet::default_params();
  EXPECT_EQ(p.power, 1.0);
  EXPECT_EQ(p.noise, 1.0);
  EXPECT_EQ(p.density, 1.0);
  EXPECT_EQ(p.threshold, 1.0);
  EXPECT_EQ(p.orthogonality, 0.3);
  EXPECT_EQ(p.pathloss_offset, 0.0);
  EXPECT_EQ(p.pathloss_exponent, 4.0);
  const auto sim = dirnet::default_simulation();
  EXPECT_EQ(sim.disk_radius, 8.0);
  EXPECT_EQ(sim.trials, 30000u);
}

TEST(ParseConfig, MinimalConfigGetsDefaults) {
  const auto spec = dirnet::parse_config_string("kind: degree-vs-density\noutput: out.csv\n");
  EXPECT_EQ(spec.kind, ExperimentKind::degree_vs_density);
  EXPECT_EQ(spec.output_path, "out.csv");
  EXPECT_EQ(spec.simulation.params, dirnet::default_params());
  EXPECT_TRUE(spec.include_analytic);
  EXPECT_TRUE(spec.include_monte_carlo);
  ASSERT_NE(spec.find_axis("density"), nullptr);
}

TEST(ParseConfig, FullConfig) {
  const auto spec = dirnet::parse_config_string(R"(
kind: sweep
metric: rate
output: sweep.csv
agreement_k: 3
params:
  power: 2
  noise: 0.5
  threshold: 1.5
  orthogonality: 0.2
  pathloss_exponent: 3.5
  pathloss_offset: 0.01
  density: 0.7
antenna:
  directivity: 0.4
  lobes: 2
  rx:
    directivity: 0.9
simulation:
  radius: 10
  trials: 500
  seed: 99
link:
  distance: 0.3
  position_angle: 90deg
  orientation: 3.0
sweep:
  - name: orientation
    from: 0deg
    to: 90deg
    step: 45deg
  - name: threshold
    values: [1, 2]
  - name: density
    from: 1
    to: 2
    count: 3
)");
  EXPECT_EQ(spec.kind, ExperimentKind::sweep);
  EXPECT_EQ(spec.resolved_metric(), dirnet::Metric::rate);
  EXPECT_EQ(spec.agreement_k, 3.0);
  EXPECT_EQ(spec.simulation.params.power, 2.0);
  EXPECT_EQ(spec.simulation.params.pathloss_offset, 0.01);
  EXPECT_EQ(spec.simulation.tx_pattern, (dirnet::AntennaPattern{0.4, 2}));
  EXPECT_EQ(spec.simulation.rx_pattern, (dirnet::AntennaPattern{0.9, 2}));
  EXPECT_EQ(spec.simulation.disk_radius, 10.0);
  EXPECT_EQ(spec.simulation.trials, 500u);
  EXPECT_EQ(spec.simulation.rng_seed, 99u);
  EXPECT_DOUBLE_EQ(*spec.link.position_angle, pi / 2);
  EXPECT_EQ(*spec.link.orientation, 3.0);
  ASSERT_EQ(spec.sweep_axes.size(), 3u);
  EXPECT_EQ(spec.sweep_axes[0].values.size(), 3u);
  EXPECT_DOUBLE_EQ(spec.sweep_axes[0].values[2], pi / 2);
  EXPECT_EQ(spec.sweep_axes[2].values, (std::vector<double>{1.0, 1.5, 2.0}));
}

TEST(ParseConfig, ExponentAtTwoIsRejectedWithLine) {
  const auto e = expect_error<dirnet::validation_error>(
      "kind: degree-vs-density\noutput: x.csv\nparams:\n  pathloss_exponent: 2\n");
  EXPECT_EQ(e.field(), "pathloss_exponent");
  EXPECT_EQ(e.line(), 4);
  EXPECT_NE(std::string(e.what()).find("exceed 2"), std::string::npos);
}

TEST(ParseConfig, OrthogonalityOutOfRange) {
  const auto e = expect_error<dirnet::validation_error>(
      "kind: degree-vs-density\noutput: x.csv\nparams:\n  orthogonality: 1.5\n");
  EXPECT_EQ(e.field(), "orthogonality");
  EXPECT_EQ(e.line(), 4);
}

TEST(ParseConfig, UnknownKeysAreErrors) {
  EXPECT_EQ(expect_error<dirnet::parse_error>("kind: sweep\nmetric: wp\nbogus: 1\n").line(), 3);
  EXPECT_EQ(expect_error<dirnet::parse_error>("kind: sweep\nparams:\n  power: 1\n  gain: 2\n").line(), 4);
  EXPECT_EQ(expect_error<dirnet::parse_error>(
                "kind: wp-curve\noutput: a\nsweep:\n  - name: directivity\n    values: [0]\n    extra: 1\n")
                .line(),
            6);
}

TEST(ParseConfig, MalformedYamlReportsLine) {
  const auto e = expect_error<dirnet::parse_error>("kind: sweep\nparams: [1, 2\nfoo: 3\n");
  EXPECT_GT(e.line(), 0);
}

TEST(ParseConfig, TypeAndKindErrors) {
  EXPECT_EQ(expect_error<dirnet::validation_error>("kind: sweep\nmetric: wp\noutput: a\nparams:\n  power: loud\n").field(),
            "power");
  EXPECT_EQ(expect_error<dirnet::validation_error>("kind: nonsense\noutput: a\n").field(), "kind");
  EXPECT_EQ(expect_error<dirnet::validation_error>("kind: sweep\noutput: a\n").field(), "metric");
  EXPECT_EQ(expect_error<dirnet::validation_error>("output: a\n").field(), "kind");
  EXPECT_EQ(expect_error<dirnet::validation_error>("kind: wp-curve\n").field(), "output");
  EXPECT_EQ(expect_error<dirnet::validation_error>(
                "kind: sweep\nmetric: wp\noutput: a\nsweep:\n  - name: colour\n    values: [1]\n")
                .field(),
            "sweep");
  EXPECT_EQ(expect_error<dirnet::validation_error>("kind: wp-curve\noutput: a\ninclude_monte_carlo: true\n").field(),
            "include_monte_carlo");
}

TEST(ParseConfig, DistanceKindsNeedOrientation) {
  const auto e = expect_error<dirnet::validation_error>("kind: connection-vs-distance\noutput: a.csv\n");
  EXPECT_EQ(e.field(), "orientation");
  EXPECT_NO_THROW(dirnet::parse_config_string("kind: connection-vs-distance\noutput: a.csv\nlink:\n  orientation: 180deg\n"));
}

TEST(ParseConfig, TaggedLinkMustFitTheDisk) {
  const auto e = expect_error<dirnet::validation_error>(
      "kind: connection-vs-orientation\noutput: a.csv\nsimulation:\n  radius: 1\nlink:\n  distance: 2\n");
  EXPECT_EQ(e.field(), "distance");
}

TEST(ParseConfig, MissingFileIsIoError) {
  EXPECT_THROW(dirnet::parse_config((scratch_dir() / "missing.yaml").string()), dirnet::io_error);
}

TEST(ParseConfig, RecipesParse) {
  for (const auto& entry : std::filesystem::directory_iterator(DIRNET_RECIPE_DIR)) {
    if (entry.path().extension() != ".yaml") continue;
    EXPECT_NO_THROW(dirnet::parse_config(entry.path().string())) << entry.path();
  }
}

TEST(Numbers, AngleSuffixAndStrictParsing) {
  EXPECT_EQ(*dirnet::parse_number("180deg", true), pi);
  EXPECT_EQ(*dirnet::parse_number(" 90 deg ", true), pi / 2);
  EXPECT_FALSE(dirnet::parse_number("90deg", false));
  EXPECT_FALSE(dirnet::parse_number("1.5x", false));
  EXPECT_FALSE(dirnet::parse_number("nan", false));
  EXPECT_EQ(*dirnet::parse_number("+2.5e-1", false), 0.25);
}

TEST(Numbers, GridsAndAxisArguments) {
  const auto grid = dirnet::arithmetic_grid(0.02, 1.0, 0.02);
  EXPECT_EQ(grid.size(), 50u);
  EXPECT_NEAR(grid.back(), 1.0, 1e-14);
  const auto axis = dirnet::parse_axis_argument("orientation=0:355deg:5deg");
  EXPECT_EQ(axis.values.size(), 72u);
  EXPECT_EQ(dirnet::parse_axis_argument("density=1,2,4").values, (std::vector<double>{1, 2, 4}));
  EXPECT_THROW(dirnet::parse_axis_argument("density"), dirnet::validation_error);
  EXPECT_THROW(dirnet::parse_axis_argument("density=1:2"), dirnet::validation_error);
  EXPECT_THROW(dirnet::arithmetic_grid(1.0, 0.0, 0.1), dirnet::validation_error);
}

TEST(Numbers, ShortestRoundTripFormatting) {
  EXPECT_EQ(dirnet::format_number(0.1), "0.1");
  EXPECT_EQ(dirnet::format_number(30000.0), "30000");
  for (double v : {pi, 1e-300, 0.63250674327666519, -2.5}) EXPECT_EQ(std::stod(dirnet::format_number(v)), v);
}

TEST(Serialization, RoundTripIsIdentity) {
  auto spec = dirnet::parse_config_string(R"(
kind: rate-vs-orientation
output: "dir with space/out, file.csv"
include_analytic: false
params:
  orthogonality: 0.15
  pathloss_exponent: 3.7
antenna:
  tx:
    directivity: 0.333
    lobes: 3
simulation:
  trials: 123
  seed: 18446744073709551615
  unit_fading: true
link:
  distance: 0.4
  position_angle: 17deg
)");
  const auto again = dirnet::parse_config_string(dirnet::serialize_config(spec));
  EXPECT_EQ(spec, again);
  EXPECT_EQ(dirnet::serialize_config(spec), dirnet::serialize_config(again));

  const auto small = small_connection_spec();
  EXPECT_EQ(dirnet::parse_config_string(dirnet::serialize_config(small)), small);
}

TEST(Grid, CartesianProductFirstAxisOutermost) {
  const auto spec = small_connection_spec();
  const auto points = dirnet::expand_grid(spec);
  ASSERT_EQ(points.size(), 4u);
  EXPECT_EQ(points[1].coordinates, (std::vector<double>{0.0, 0.5}));
  EXPECT_EQ(points[2].simulation.tx_pattern.directivity, 1.0);
  EXPECT_EQ(points[2].simulation.rx_pattern.directivity, 1.0);
  EXPECT_EQ(points[3].link.distance, 0.5);
  EXPECT_EQ(points[3].link.orientation, pi);
}

TEST(Csv, QuotingAndEmptyCells) {
  dirnet::ResultTable t;
  t.columns = {"a", "b,c", "say \"hi\""};
  t.rows = {{1.5, std::nullopt, 0.1}};
  EXPECT_EQ(dirnet::to_csv(t), "a,\"b,c\",\"say \"\"hi\"\"\"\n1.5,,0.1\n");
}

TEST(Run, WpCurveIsAnalyticOnly) {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::wp_curve;
  spec.include_monte_carlo = false;
  spec.output_path = "unused.csv";
  spec.sweep_axes = {{"pathloss_exponent", {4.0}}, {"directivity", {0.0, 1.0}}};
  const auto r = dirnet::compute_experiment(spec);
  EXPECT_EQ(r.table.columns, (std::vector<std::string>{"pathloss_exponent", "directivity", "analytic"}));
  EXPECT_NEAR(*r.table.rows[0][2], 2.0 * pi, 1e-12);
  EXPECT_NEAR(*r.table.rows[1][2], 4.0 * std::sqrt(2.0), 1e-10);
  EXPECT_EQ(r.agreement.rows_compared, 0u);
}

TEST(Run, ConnectionTableColumnsAndAgreement) {
  const auto spec = small_connection_spec();
  const auto r = dirnet::compute_experiment(spec);
  EXPECT_EQ(r.table.columns, (std::vector<std::string>{"directivity", "distance", "analytic", "mc_estimate",
                                                       "mc_std_error", "trials"}));
  ASSERT_EQ(r.table.rows.size(), 4u);
  for (const auto& row : r.table.rows) {
    EXPECT_EQ(*row[5], 3000.0);
    EXPECT_NEAR(*row[2], *row[3], 4.0 * *row[4] + 1.0 / 3000.0);
  }
  EXPECT_EQ(r.agreement.rows_compared, 4u);
  EXPECT_TRUE(r.agreement.violations.empty());
  // Grouped rows equal a standalone estimate on the same config.
  auto sim = spec.simulation;
  sim.tx_pattern = sim.rx_pattern = dirnet::AntennaPattern{1.0, 1};
  EXPECT_EQ(*r.table.rows[3][3], dirnet::estimate_connection_probability(sim, {0.5, 0.0, pi}).estimate);
}

TEST(Run, ViolationsAreReportedNotDropped) {
  auto spec = small_connection_spec();
  spec.simulation.trials = 50;
  spec.agreement_k = 1e-9;
  spec.sweep_axes = {{"directivity", {0.0}}, {"distance", {0.5}}};
  spec.simulation.params.threshold = 1.0;
  const auto r = dirnet::compute_experiment(spec);
  EXPECT_EQ(r.table.rows.size(), 1u);
  EXPECT_EQ(r.agreement.rows_compared, 1u);
  EXPECT_EQ(r.agreement.violations.size(), r.agreement.max_normalized_deviation > 1.0 ? 1u : 0u);
}

TEST(Run, DegreeTableHasFractionColumns) {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::degree_vs_density;
  spec.output_path = "unused.csv";
  spec.simulation.trials = 400;
  spec.sweep_axes = {{"density", {0.5}}};
  const auto r = dirnet::compute_experiment(spec);
  EXPECT_EQ(r.table.columns.back(), "mc_fraction_std_error");
  ASSERT_TRUE(r.table.rows[0][r.table.column_index("mc_fraction")].has_value());
  dirnet::SystemParams p;
  p.density = 0.5;
  EXPECT_EQ(*r.table.rows[0][1], dirnet::mean_degree_closed_form(p, 0.0));
}

TEST(Run, DegreeAnalyticFallsBackToQuadrature) {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::degree_vs_density;
  spec.output_path = "unused.csv";
  spec.include_monte_carlo = false;
  spec.simulation.params.pathloss_exponent = 3.0;
  spec.sweep_axes = {{"density", {1.0}}};
  const auto r = dirnet::compute_experiment(spec);
  EXPECT_NEAR(*r.table.rows[0][1], dirnet::mean_degree_numeric(spec.simulation.params, {}, {}), 1e-8);
}

TEST(Run, WritesDeterministicCsvAndMetadata) {
  auto spec = small_connection_spec();
  spec.output_path = (scratch_dir() / "first.csv").string();
  dirnet::run_experiment(spec);
  const auto first = read_file(spec.output_path);
  const auto meta = nlohmann::json::parse(read_file(dirnet::metadata_path(spec.output_path)));
  spec.output_path = (scratch_dir() / "second.csv").string();
  spec.simulation.workers = 2;
  dirnet::run_experiment(spec);
  EXPECT_EQ(first, read_file(spec.output_path));
  EXPECT_EQ(first.substr(0, first.find('\n')), "directivity,distance,analytic,mc_estimate,mc_std_error,trials");
  EXPECT_EQ(meta["parameters"]["orthogonality"], 0.3);
  EXPECT_EQ(meta["simulation"]["trials"], 3000);
  EXPECT_EQ(meta["agreement"]["rows_compared"], 4);
  EXPECT_NE(meta["config_yaml"].get<std::string>().find("connection-vs-distance"), std::string::npos);
}

TEST(Run, UnwritableOutputIsIoError) {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::wp_curve;
  spec.include_monte_carlo = false;
  spec.output_path = (scratch_dir() / "no" / "such" / "dir" / "x.csv").string();
  spec.sweep_axes = {{"directivity", {0.5}}};
  EXPECT_THROW(dirnet::run_experiment(spec), dirnet::io_error);
}
