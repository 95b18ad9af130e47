#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "catch_amalgamated.hpp"

#include "qscat/config.hpp"
#include "qscat/experiment.hpp"

using namespace qscat;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

namespace {

const char* kBase = R"(schema_version: 1
system: {kind: two_spin}
initial_state: {kind: two_spin_pure, pop_a: 0.1, pop_b: 0.5}
interaction:
  tau: 2.5e-3
  lambda: 2.0
kinetic:
  mass: 1.0
models: [semiclassical, time_dependent]
)";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string error_of(const std::string& text, const std::vector<std::string>& sets = {}) {
  try {
    parse_config(text, "run.yaml", sets);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal document parses with defaults", "[config]") {
  const ExperimentConfig c = parse_config(kBase, "run.yaml");
  CHECK(c.schema_version == 1);
  CHECK(c.system.kind == SystemSpec::Kind::two_spin);
  CHECK(c.system.two_spin.jx == 0.8);
  REQUIRE(c.interaction.lambda);
  CHECK(*c.interaction.lambda == 2.0);
  CHECK(c.interaction.a == 3.5);
  CHECK_FALSE(c.kinetic.p0);
  CHECK(c.models.size() == 2);
  CHECK(c.sweep.variable == SweepVariable::none);
  CHECK(c.quadrature.nodes == 128);
  CHECK(c.ode_tol == 1e-10);
}

TEST_CASE("errors carry file, line and column", "[config]") {
  CHECK_THAT(error_of(std::string(kBase) + "bogus: 1\n"), ContainsSubstring("run.yaml:10:1") &&
                                                              ContainsSubstring("unknown key"));
  const std::string bad_tau = R"(schema_version: 1
interaction:
  tau: -1
  lambda: 1
)";
  CHECK_THAT(error_of(bad_tau), ContainsSubstring("run.yaml:3:8") && ContainsSubstring("interaction.tau") &&
                                    ContainsSubstring("must be positive"));
  const std::string bad_model = R"(schema_version: 1
interaction: {tau: 1, lambda: 1}
models: [exact_sm, warp_drive]
)";
  CHECK_THAT(error_of(bad_model), ContainsSubstring("run.yaml:3:20") && ContainsSubstring("warp_drive"));
  CHECK_THAT(error_of("schema_version: 1\ninteraction: {tau: 1, lambda: 1}\nkinetic: {mass: abc}\n"),
             ContainsSubstring("run.yaml:3:17") && ContainsSubstring("expected a number"));
}

TEST_CASE("schema_version is required and checked", "[config]") {
  CHECK_THAT(error_of("interaction: {tau: 1, lambda: 1}\n"), ContainsSubstring("schema_version") &&
                                                                  ContainsSubstring("missing"));
  CHECK_THAT(error_of("schema_version: 2\ninteraction: {tau: 1, lambda: 1}\n"),
             ContainsSubstring("unsupported schema_version 2"));
}

TEST_CASE("malformed YAML reports its position", "[config]") {
  CHECK_THAT(error_of("schema_version: 1\ninteraction: {tau: 1\n"), ContainsSubstring("run.yaml:"));
}

TEST_CASE("lambda and v0 are exclusive", "[config]") {
  CHECK_THAT(error_of("schema_version: 1\ninteraction: {tau: 1, lambda: 1, v0: 1}\n"),
             ContainsSubstring("either lambda or v0"));
}

TEST_CASE("matrix systems are validated", "[config]") {
  const std::string text = R"(schema_version: 1
system:
  kind: matrices
  h_a: [[1, [0, 1]], [[0, 1], -1]]
  h_b: [[0.5, 0], [0, -0.5]]
  nu: [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
initial_state: {kind: maximally_mixed}
interaction: {tau: 1, lambda: 1}
)";
  CHECK_THAT(error_of(text), ContainsSubstring("run.yaml:4:") && ContainsSubstring("Hermitian"));
  std::string ok = text;
  ok.replace(ok.find("[[1, [0, 1]], [[0, 1], -1]]"), 27, "[[1, [0, 1]], [[0, -1], -1]]");
  CHECK_NOTHROW(parse_config(ok, "run.yaml"));
  std::string small_nu = ok;
  small_nu.replace(small_nu.find("nu: "), 4, "nu: [[1]]\n  old: ");
  CHECK_THAT(error_of(small_nu), ContainsSubstring("unknown key"));
}

TEST_CASE("--set overrides values and anchors errors to the override", "[config]") {
  const ExperimentConfig c = parse_config(kBase, "run.yaml",
                                          {"interaction.lambda=5", "kinetic.sigma_x=3", "sweep.variable=lambda",
                                           "sweep.values=[1, 2]"});
  CHECK(*c.interaction.lambda == 5.0);
  CHECK(*c.kinetic.sigma_x == 3.0);
  CHECK(c.sweep.values.size() == 2);
  CHECK_THAT(error_of(kBase, {"interaction.tau=0"}), ContainsSubstring("--set interaction.tau"));
  CHECK_THAT(error_of(kBase, {"interaction.lambda"}), ContainsSubstring("expected key=value"));
  CHECK_THAT(error_of(kBase, {"models.x=1"}), ContainsSubstring("not a mapping"));
}

TEST_CASE("sweep ranges", "[config]") {
  const ExperimentConfig c = parse_config(
      std::string(kBase) + "sweep: {variable: sigma_x, values: {start: 1, stop: 3, count: 5}}\n", "run.yaml");
  REQUIRE(c.sweep.values.size() == 5);
  CHECK(c.sweep.values[1] == 1.5);
  CHECK_THAT(error_of(std::string(kBase) + "sweep: {variable: tau, values: [1]}\n"),
             ContainsSubstring("unknown sweep variable"));
}

TEST_CASE("physical preconditions surface as config errors", "[config]") {
  const ExperimentConfig c = parse_config(kBase, "run.yaml", {"kinetic.sigma_p=1", "kinetic.sigma_x=0.1"});
  CHECK_THROWS_AS(resolve_point(c), ConfigError);
  const ExperimentConfig sweep = parse_config(
      kBase, "run.yaml", {"kinetic.sigma_p=1", "sweep.variable=sigma_x", "sweep.values=[0.5, 0.2]"});
  CHECK_THROWS_AS(run_sweep(sweep), ConfigError);
}

TEST_CASE("resolved point uses the default kinematics", "[config]") {
  const ExperimentConfig c = parse_config(kBase, "run.yaml");
  const ExperimentPoint pt = resolve_point(c);
  CHECK_THAT(pt.kinetic.p0(), WithinRel(1400.0, 1e-14));
  CHECK_THAT(pt.kinetic.sigma_p(), WithinRel(100.0 * 2.5 / 1400.0, 1e-14));
  CHECK_THAT(pt.spatial.mean(), WithinRel(2.0 / 2.5e-3, 1e-14));
  CHECK_THAT(pt.temporal.mean(), WithinRel(2.0 / 2.5e-3, 1e-14));
  const ExperimentPoint pv = resolve_point(parse_config(kBase, "run.yaml", {"interaction.v0=10", "interaction.lambda=null"}));
  CHECK_THAT(pv.lambda, WithinRel(10.0 * 2.5e-3, 1e-14));
}

TEST_CASE("shipped configurations parse", "[config]") {
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(QSCAT_CONFIG_DIR)) {
    if (entry.path().extension() != ".yaml") {
      continue;
    }
    INFO(entry.path().string());
    const ExperimentConfig c = parse_config(read_file(entry.path()), entry.path().string());
    CHECK_NOTHROW(resolve_point(c));
    ++count;
  }
  CHECK(count >= 4);
}
