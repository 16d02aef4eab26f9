// Command-line front end: reg-time, ptz-complete, ptz-restricted,
// arb-transfer, oracle-check.

#include "ptz/experiment.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace ptz;

namespace {

enum ExitCode { kOk = 0, kSchema = 1, kCompute = 2, kOracle = 3 };

struct Options {
  std::string config_path;
  std::string preset;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

Json load_config(const Options& opt, Protocol protocol) {
  Json j = Json::object();
  if (!opt.preset.empty()) j = preset_config(opt.preset);
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw SchemaError("--config", "cannot open " + opt.config_path);
    Json file;
    try {
      file = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw SchemaError("/", std::string("invalid JSON: ") + e.what());
    }
    if (!file.is_object()) throw SchemaError("/", "expected an object");
    j.merge_patch(file);
  }
  if (opt.preset.empty() && opt.config_path.empty() && protocol != Protocol::oracle_check) {
    throw SchemaError("--config", "give --config and/or --preset");
  }
  if (opt.seed) j["seed"] = *opt.seed;
  if (opt.threads) j["threads"] = *opt.threads;
  if (opt.out) j["output"] = *opt.out;
  return j;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const Json& j) {
  auto f = open_output(path);
  f << j.dump(2) << "\n";
}

Json record_header(const ExperimentConfig& c) {
  return {{"schema", kCsvSchemaVersion}, {"config", c.to_json()}, {"seed", c.seed}};
}

int run(Protocol protocol, const Options& opt) {
  const ExperimentConfig config = parse_experiment_config(load_config(opt, protocol), protocol);
  const fs::path out = config.output;
  fs::create_directories(out);

  switch (protocol) {
    case Protocol::registration_time: {
      auto csv = open_output(out / "registration_times.csv");
      int failed = 0;
      for (const auto& r : run_table_registration_times(config, csv)) {
        std::cout << "N=" << r.n_sites << " t*=" << r.t_star << (r.failed ? " FAILED: " + r.note : "") << "\n";
        failed += r.failed;
      }
      return failed ? kCompute : kOk;
    }
    case Protocol::ptz_complete:
    case Protocol::ptz_restricted: {
      auto csv = open_output(out / "deviation.csv");
      const auto rows = run_curve_deviation(config, csv);
      Json rec = record_header(config);
      rec["results"] = Json::array();
      int failed = 0;
      for (const auto& r : rows) {
        rec["results"].push_back(r.record);
        std::cout << "N=" << r.n_sites << " N_A=" << r.n_ancilla << " seed=" << r.seed << " delta=" << r.delta
                  << " residual=" << r.residual << (r.failed ? " FAILED: " + r.note : "") << "\n";
        failed += r.failed;
      }
      write_json(out / "solutions.json", rec);
      return failed ? kCompute : kOk;
    }
    case Protocol::arbitrary_parameter: {
      auto scan = open_output(out / "lambda_scan.csv");
      auto summary = open_output(out / "lambda_summary.csv");
      const auto rows = run_curve_lambda(config, scan, summary);
      Json rec = record_header(config);
      rec["results"] = Json::array();
      int failed = 0;
      for (const auto& r : rows) {
        rec["results"].push_back(r.record);
        std::cout << "N=" << r.n_sites << " N_ER=" << r.n_extended << " t_opt=" << r.t_opt
                  << " |lambda_opt|=" << r.lambda_opt << (r.failed ? " FAILED: " + r.note : "") << "\n";
        failed += r.failed;
      }
      write_json(out / "arbitrary.json", rec);
      return failed ? kCompute : kOk;
    }
    case Protocol::oracle_check: {
      const OracleReport report = run_oracle_suite(config);
      Json rec = record_header(config);
      rec["report"] = oracle_report_to_json(report);
      write_json(out / "oracle_report.json", rec);
      std::cout << report.cases.size() << " configurations, max |delta| = " << report.max_deviation << ", "
                << report.failures << " failures\n";
      if (!report.passed()) {
        std::cerr << "oracle mismatch: " << report.first_failure << "\n";
        return kOracle;
      }
      return kOk;
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perfect transfer of zero-order coherence matrices along XX spin chains"};
  app.require_subcommand(1);
  Options opt;
  std::string presets;
  for (const auto& p : preset_names()) presets += (presets.empty() ? "" : ", ") + p;

  std::vector<std::pair<CLI::App*, Protocol>> subs;
  for (Protocol p : {Protocol::registration_time, Protocol::ptz_complete, Protocol::ptz_restricted,
                     Protocol::arbitrary_parameter, Protocol::oracle_check}) {
    CLI::App* sub = app.add_subcommand(std::string(subcommand_name(p)), std::string(to_string(p)) + " run");
    sub->add_option("--config", opt.config_path, "JSON experiment config (merged over the preset)");
    sub->add_option("--preset", opt.preset, "reproduction preset: " + presets);
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "base seed");
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    subs.emplace_back(sub, p);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kSchema;
  }

  for (const auto& [sub, protocol] : subs) {
    if (!sub->parsed()) continue;
    try {
      return run(protocol, opt);
    } catch (const SchemaError& e) {
      std::cerr << "config error at " << e.what() << "\n";
      return kSchema;
    } catch (const std::exception& e) {
      std::cerr << "failed: " << e.what() << "\n";
      return kCompute;
    }
  }
  return kSchema;
}
