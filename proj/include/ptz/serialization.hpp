#pragma once

#include "ptz/coherence_states.hpp"
#include "ptz/optimizers.hpp"
#include "ptz/ptz_solvers.hpp"
#include "ptz/receiver_unitary.hpp"
#include "ptz/transfer_maps.hpp"

#include "json.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace ptz {

using Json = nlohmann::json;

inline constexpr const char* kCsvSchemaVersion = "ptz-csv v1";

/// {"re": [[...]], "im": [[...]]}, row-major.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json state_to_json(const ZeroCoherenceState& s);
ZeroCoherenceState state_from_json(const Json& j);

/// {"n_er", "active_blocks", "angles": flat array in block / x-then-y order}.
Json params_to_json(const ReceiverUnitaryParams& p);
ReceiverUnitaryParams params_from_json(const Json& j);

Json map_to_json(const OneExcitationMap& map, const ScaleFactors& scales);
Json solution_to_json(const PTZSolution& sol);

Json de_config_to_json(const DEConfig& c);
/// Fields missing from `j` keep the values of `base`.
DEConfig de_config_from_json(const Json& j, DEConfig base);

/// CSV with a schema-version comment line, the embedded config and seed as
/// further comment lines, then a header row.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const Json& config, std::uint64_t seed, const std::vector<std::string>& columns);

  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(const std::string& v);
  /// Free text: always quoted, inner quotes doubled.
  CsvWriter& text(const std::string& v);
  void end_row();

 private:
  std::ostream& os_;
  std::size_t columns_;
  std::size_t filled_ = 0;
};

void write_history_csv(std::ostream& os, const std::vector<HistoryEntry>& history, const Json& config, std::uint64_t seed);

}  // namespace ptz
