#include "ptz/serialization.hpp"

#include <cstdio>

namespace ptz {

Json matrix_to_json(const Matrix& m) {
  Json re = Json::array();
  Json im = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json rr = Json::array();
    Json ri = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      rr.push_back(m(i, j).real());
      ri.push_back(m(i, j).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  return {{"re", re}, {"im", im}};
}

Matrix matrix_from_json(const Json& j) {
  const Json& re = j.at("re");
  const Json& im = j.at("im");
  if (!re.is_array() || re.size() != im.size()) throw DomainError("matrix json: re/im row counts differ");
  const auto rows = static_cast<Eigen::Index>(re.size());
  const auto cols = rows ? static_cast<Eigen::Index>(re[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(re[i].size()) != cols || static_cast<Eigen::Index>(im[i].size()) != cols) {
      throw DomainError("matrix json: ragged rows");
    }
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = Complex(re[i][j2].get<double>(), im[i][j2].get<double>());
  }
  return m;
}

Json state_to_json(const ZeroCoherenceState& s) {
  Json blocks = Json::array();
  for (const auto& b : s.blocks()) blocks.push_back(matrix_to_json(b));
  return {{"subsystem_size", s.subsystem_size()}, {"max_excitation", s.max_excitation()}, {"blocks", blocks}};
}

ZeroCoherenceState state_from_json(const Json& j) {
  ZeroCoherenceState s(j.at("subsystem_size").get<int>(), j.at("max_excitation").get<int>());
  const Json& blocks = j.at("blocks");
  if (static_cast<int>(blocks.size()) != s.max_excitation() + 1) throw DomainError("state json: wrong block count");
  for (int k = 0; k <= s.max_excitation(); ++k) {
    Matrix m = matrix_from_json(blocks[k]);
    if (m.rows() != s.block_dim(k) || m.cols() != s.block_dim(k)) {
      throw DomainError("state json: block " + std::to_string(k) + " has wrong shape");
    }
    s.block(k) = std::move(m);
  }
  return s;
}

Json params_to_json(const ReceiverUnitaryParams& p) {
  const RealVector flat = p.flat();
  return {{"n_er", p.n_er()},
          {"active_blocks", p.active_blocks()},
          {"angles", std::vector<double>(flat.data(), flat.data() + flat.size())}};
}

ReceiverUnitaryParams params_from_json(const Json& j) {
  const auto angles = j.at("angles").get<std::vector<double>>();
  return ReceiverUnitaryParams::from_flat(j.at("n_er").get<int>(), j.at("active_blocks").get<int>(), angles);
}

Json map_to_json(const OneExcitationMap& map, const ScaleFactors& scales) {
  return {{"t", map.t},
          {"W", matrix_to_json(map.matrix)},
          {"lambda", matrix_to_json(scales.lambda)},
          {"lambda_opt", scales.lambda_opt},
          {"lambda_opt_offdiag", scales.lambda_opt_offdiag}};
}

Json solution_to_json(const PTZSolution& sol) {
  Json j = {{"t_star", sol.t_star},
            {"sender_state", state_to_json(sol.sender_state)},
            {"residual", sol.residual},
            {"delta", sol.delta},
            {"swap_target", {{"block", sol.swap_target.block}, {"ordinal", sol.swap_target.ordinal}}},
            {"round_trip_error", sol.round_trip_error},
            {"min_eigenvalue", sol.min_eigenvalue}};
  if (sol.phi) j["phi"] = params_to_json(*sol.phi);
  return j;
}

Json de_config_to_json(const DEConfig& c) {
  return {{"population_size", c.population_size},
          {"crossover_probability", c.crossover_probability},
          {"mutation_range", {c.mutation_lo, c.mutation_hi}},
          {"max_generations", c.max_generations},
          {"spread_atol", c.spread_atol},
          {"spread_rtol", c.spread_rtol},
          {"seed", c.seed}};
}

DEConfig de_config_from_json(const Json& j, DEConfig c) {
  if (j.contains("population_size")) c.population_size = j["population_size"].get<int>();
  if (j.contains("crossover_probability")) c.crossover_probability = j["crossover_probability"].get<double>();
  if (j.contains("mutation_range")) {
    c.mutation_lo = j["mutation_range"].at(0).get<double>();
    c.mutation_hi = j["mutation_range"].at(1).get<double>();
  }
  if (j.contains("max_generations")) c.max_generations = j["max_generations"].get<int>();
  if (j.contains("spread_atol")) c.spread_atol = j["spread_atol"].get<double>();
  if (j.contains("spread_rtol")) c.spread_rtol = j["spread_rtol"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  c.validate();
  return c;
}

CsvWriter::CsvWriter(std::ostream& os, const Json& config, std::uint64_t seed, const std::vector<std::string>& columns)
    : os_(os), columns_(columns.size()) {
  os_ << "# " << kCsvSchemaVersion << "\n";
  os_ << "# config: " << config.dump() << "\n";
  os_ << "# seed: " << seed << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
  os_ << "\n";
}

CsvWriter& CsvWriter::cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return cell(std::string(buf));
}

CsvWriter& CsvWriter::cell(long long v) { return cell(std::to_string(v)); }

CsvWriter& CsvWriter::cell(const std::string& v) {
  if (filled_ == columns_) throw DomainError("csv: too many cells in row");
  os_ << (filled_ ? "," : "") << v;
  ++filled_;
  return *this;
}

CsvWriter& CsvWriter::text(const std::string& v) {
  std::string q = "\"";
  for (char ch : v) {
    if (ch == '"') q += '"';
    q += ch == '\n' ? ' ' : ch;
  }
  return cell(q + "\"");
}

void CsvWriter::end_row() {
  if (filled_ != columns_) throw DomainError("csv: row has " + std::to_string(filled_) + " of " + std::to_string(columns_) + " cells");
  os_ << "\n";
  os_.flush();
  filled_ = 0;
}

void write_history_csv(std::ostream& os, const std::vector<HistoryEntry>& history, const Json& config, std::uint64_t seed) {
  CsvWriter w(os, config, seed, {"generation", "best", "mean", "spread"});
  for (const auto& h : history) {
    w.cell(h.generation).cell(h.best).cell(h.mean).cell(h.spread);
    w.end_row();
  }
}

}  // namespace ptz
