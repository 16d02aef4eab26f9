#pragma once

#include "ptz/chain_model.hpp"
#include "ptz/optimizers.hpp"
#include "ptz/oracle.hpp"
#include "ptz/ptz_solvers.hpp"
#include "ptz/serialization.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ptz {

enum class Protocol { registration_time, ptz_complete, ptz_restricted, arbitrary_parameter, oracle_check };

/// Config spelling ("registration-time", ...).
std::string_view to_string(Protocol p);
Protocol protocol_from_string(std::string_view name);
/// CLI spelling ("reg-time", ...).
std::string_view subcommand_name(Protocol p);

/// Invalid experiment config; path is a JSON-pointer-like field path.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct ExperimentConfig {
  Protocol protocol = Protocol::registration_time;
  CouplingMode coupling_mode = CouplingMode::full_dipolar;
  std::vector<int> n_sites;
  int n_sender = 2;
  int n_receiver = 2;
  std::vector<int> n_extended;  ///< one entry per curve; empty where unused
  int max_excitation = 1;
  RegistrationCriterion criterion = RegistrationCriterion::max_frobenius_w;
  double window_lo_factor = 0.7;  ///< window [lo N, hi N] unless `window` is set
  double window_hi_factor = 1.3;
  std::optional<std::pair<double, double>> window;
  double step = 0.01;
  std::optional<double> t_star;  ///< skips the registration-time search
  DEConfig de;
  int runs = 1;  ///< independent optimizer seeds seed, seed+1, ...
  NelderMeadConfig polish;
  ObjectiveSpec objective;
  OracleBatteryConfig oracle;
  std::string output = "results";
  std::uint64_t seed = 0;
  int threads = 1;

  TimeWindow window_for(int n_sites) const;
  /// Fully resolved config (all defaults filled); parsing it again gives an
  /// identical config.
  Json to_json() const;
};

/// Validates `j` against the experiment schema. `expected` is the protocol
/// implied by the subcommand; a conflicting "protocol" field is an error.
ExperimentConfig parse_experiment_config(const Json& j, Protocol expected);

/// Named reproduction presets (table1, table2-s3, table2-s4, fig1, fig2-s3,
/// fig2-s4, fig3, fig4).
Json preset_config(std::string_view name);
std::vector<std::string> preset_names();

// ---------------------------------------------------------------------------
// Sweeps. Every runner writes CSV with the embedded resolved config and seed,
// records failures per row and keeps going.

struct RegistrationRow {
  int n_sites = 0;
  double t_star = 0.0;
  double value = 0.0;
  double wall_time = 0.0;
  bool failed = false;
  std::string note;
};

std::vector<RegistrationRow> run_table_registration_times(const ExperimentConfig& config, std::ostream& csv);

struct DeviationRow {
  int n_sites = 0;
  int n_ancilla = 0;
  std::uint64_t seed = 0;
  double t_star = 0.0;
  double delta = 0.0;
  double residual = 0.0;
  double round_trip_error = 0.0;
  double min_eigenvalue = 0.0;
  double wall_time = 0.0;
  bool failed = false;
  std::string note;
  Json record;  ///< solution record (empty on failure)
};

/// ptz-complete or ptz-restricted over n_sites x n_extended x runs.
std::vector<DeviationRow> run_curve_deviation(const ExperimentConfig& config, std::ostream& csv);

struct LambdaRow {
  int n_sites = 0;
  int n_extended = 0;
  double t_opt = 0.0;
  double lambda_opt = 0.0;
  double offdiag_residual = 0.0;
  double restoring_error = 0.0;  ///< over 20 random senders
  double wall_time = 0.0;
  bool failed = false;
  std::string note;
  std::vector<ArbitraryScanPoint> scan;
  Json record;
};

std::vector<LambdaRow> run_curve_lambda(const ExperimentConfig& config, std::ostream& scan_csv, std::ostream& summary_csv);

OracleReport run_oracle_suite(const ExperimentConfig& config);
Json oracle_report_to_json(const OracleReport& report);

}  // namespace ptz
