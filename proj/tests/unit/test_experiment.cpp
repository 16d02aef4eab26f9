#include "doctest.h"

#include "ptz/experiment.hpp"

#include <sstream>

using namespace ptz;

namespace {

std::string schema_path(const Json& j, Protocol p) {
  try {
    parse_experiment_config(j, p);
  } catch (const SchemaError& e) {
    return e.path();
  }
  return "";
}

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.starts_with("#")) continue;
    if (header) {
      header = false;
      continue;
    }
    out.push_back(line);
  }
  return out;
}

double field(const std::string& line, int col) {
  std::istringstream in(line);
  std::string cell;
  for (int i = 0; i <= col; ++i) std::getline(in, cell, ',');
  return std::stod(cell);
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("schema errors carry field paths") {
  const Protocol reg = Protocol::registration_time;
  CHECK(schema_path({{"n_sites", Json::array()}, {"n_sender", 2}}, reg) == "/n_sites");
  CHECK(schema_path({{"n_sites", {{"from", 20}, {"to", 10}}}, {"n_sender", 2}}, reg) == "/n_sites");
  CHECK(schema_path({{"n_sites", {10}}, {"n_sender", 2}, {"colour", 1}}, reg) == "/colour");
  CHECK(schema_path({{"n_sites", {10, "x"}}, {"n_sender", 2}}, reg) == "/n_sites/1");
  CHECK(schema_path({{"n_sites", {10}}}, reg) == "/n_sender");
  CHECK(schema_path({{"n_sites", {10}}, {"n_sender", 2}, {"time", {{"step", -1}}}}, reg) == "/time/step");
  CHECK(schema_path({{"n_sites", {10}}, {"n_sender", 2}, {"chain", {{"coupling_mode", "xyz"}}}}, reg) == "/chain/coupling_mode");
  CHECK(schema_path({{"protocol", "ptz-complete"}, {"n_sites", {10}}, {"n_sender", 2}}, reg) == "/protocol");
  CHECK(schema_path({{"n_sites", {10}}, {"n_sender", 3}, {"n_extended", 4},
                     {"optimizer", {{"mutation_range", {0.5, 2.5}}}}},
                    Protocol::ptz_restricted) == "/optimizer/mutation_range");
  CHECK(schema_path({{"n_sites", {10}}, {"n_sender", 3}, {"n_extended", 4}, {"n_ancilla", 1}}, Protocol::ptz_restricted) ==
        "/n_ancilla");
  CHECK(schema_path({{"n_sites", {10}}}, Protocol::oracle_check) == "/n_sites");
  CHECK(schema_path({{"n_sites", {10}}, {"n_sender", 2}}, reg).empty());
}

TEST_CASE("ancilla count is an alternative to the extended-receiver size") {
  const Json base = {{"n_sites", {20}}, {"n_sender", 3}};
  Json a = base;
  a["n_ancilla"] = {1, 2, 3};
  Json e = base;
  e["n_extended"] = {4, 5, 6};
  CHECK(parse_experiment_config(a, Protocol::ptz_restricted).n_extended ==
        parse_experiment_config(e, Protocol::ptz_restricted).n_extended);
}

TEST_CASE("resolved config parses back to itself") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const Json preset = preset_config(name);
    const Protocol p = protocol_from_string(preset["protocol"].get<std::string>());
    const ExperimentConfig c = parse_experiment_config(preset, p);
    CHECK(parse_experiment_config(c.to_json(), p).to_json() == c.to_json());
  }
  CHECK_THROWS_AS(preset_config("fig9"), SchemaError);
}

TEST_CASE("defaults follow the sender size") {
  const ExperimentConfig c =
      parse_experiment_config({{"n_sites", {10}}, {"n_sender", 2}, {"n_extended", 3}}, Protocol::arbitrary_parameter);
  CHECK(c.de.population_size == 30);
  CHECK(c.step == 0.05);
  const ExperimentConfig s = parse_experiment_config(
      {{"n_sites", {10}}, {"n_sender", 2}, {"n_extended", 3}, {"optimizer", {{"profile", "stress"}}}}, Protocol::arbitrary_parameter);
  CHECK(s.de.population_size == 2000);
}

TEST_CASE("table presets reproduce reference times") {
  SUBCASE("excitation-probability time, N = 55") {
    Json j = preset_config("table1");
    j["n_sites"] = {55};
    std::ostringstream csv;
    const auto rows = run_table_registration_times(parse_experiment_config(j, Protocol::registration_time), csv);
    REQUIRE(rows.size() == 1);
    CHECK(std::abs(rows[0].t_star - 59.2527) < 5e-3);
    CHECK(std::abs(field(data_lines(csv.str()).at(0), 2) - 59.2527) < 5e-3);
  }
  SUBCASE("Frobenius time, four-site sender, N = 60") {
    Json j = preset_config("table2-s4");
    j["n_sites"] = {60};
    std::ostringstream csv;
    const auto rows = run_table_registration_times(parse_experiment_config(j, Protocol::registration_time), csv);
    CHECK(std::abs(rows.at(0).t_star - 63.1042) < 5e-3);
  }
}

TEST_CASE("failed rows are recorded and the sweep continues") {
  const Json j = {{"n_sites", {12}}, {"n_sender", 3}, {"n_ancilla", {0, 1}}, {"optimizer", {{"max_generations", 300}}}};
  std::ostringstream csv;
  const auto rows = run_curve_deviation(parse_experiment_config(j, Protocol::ptz_restricted), csv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].note.find("warning") != std::string::npos);
  CHECK_FALSE(rows[1].failed);
  CHECK(rows[1].residual < 1e-10);
  const auto lines = data_lines(csv.str());
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].find("N_ER >= N_S + 1") != std::string::npos);
}

TEST_CASE("single chain, single time gives one scan row") {
  const Json j = {{"n_sites", {10}}, {"n_sender", 2}, {"n_extended", 3}, {"time", {{"t_star", 12.0}}}};
  std::ostringstream scan, summary;
  const auto rows = run_curve_lambda(parse_experiment_config(j, Protocol::arbitrary_parameter), scan, summary);
  REQUIRE(rows.size() == 1);
  CHECK(data_lines(scan.str()).size() == 1);
  CHECK(data_lines(summary.str()).size() == 1);
  CHECK(rows[0].t_opt == 12.0);
  CHECK(rows[0].restoring_error < 1e-8);
}

TEST_CASE("complete-protocol curve and oracle suite") {
  std::ostringstream csv;
  const auto rows = run_curve_deviation(
      parse_experiment_config({{"n_sites", {10, 12}}, {"n_sender", 2}}, Protocol::ptz_complete), csv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].delta == doctest::Approx(0.801089).epsilon(1e-5));
  CHECK(rows[1].round_trip_error < 1e-8);

  const ExperimentConfig oc = parse_experiment_config({{"oracle", {{"configurations", 5}, {"max_sites", 5}}}}, Protocol::oracle_check);
  CHECK(run_oracle_suite(oc).passed());
  const ExperimentConfig big = parse_experiment_config({{"oracle", {{"max_sites", 12}}}}, Protocol::oracle_check);
  CHECK_THROWS_AS(run_oracle_suite(big), CapacityError);
}

}  // TEST_SUITE
