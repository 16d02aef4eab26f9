#pragma once

#include "ptz/chain_model.hpp"
#include "ptz/coherence_states.hpp"
#include "ptz/receiver_unitary.hpp"
#include "ptz/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ptz {

/// Dense 2^N reference model. Basis index bit (N - s) holds site s, so site 1
/// is the most significant bit; bit value 1 means the spin is excited.
class FullStateOracle {
 public:
  static constexpr int kMaxSites = 10;

  explicit FullStateOracle(const ChainSpec& chain);

  int n_sites() const { return chain_.n_sites; }
  const ChainSpec& chain() const { return chain_; }
  /// sum_{i<j} D_ij (I_x^i I_x^j + I_y^i I_y^j) with I = sigma / 2.
  const Matrix& hamiltonian() const { return h_; }
  Matrix total_iz() const;
  /// exp(-i H t) through a dense matrix exponential.
  Matrix propagator(double t) const;
  /// I (x) U(phi) with U acting on the last n_er() sites.
  Matrix receiver_unitary(const ReceiverUnitaryParams& params) const;
  /// rho^(S) (x) |0...0><0...0|.
  Matrix initial_state(const ZeroCoherenceState& sender) const;

 private:
  ChainSpec chain_;
  Matrix h_;
};

/// Traces out the first n - n_keep sites of a dense n-site matrix by summing
/// over their bit patterns.
Matrix dense_partial_trace(const Matrix& rho, int n_sites, int n_keep);

/// Receiver density matrix (dense, 2^N_R) of the full-space pipeline
/// Tr_{first N - N_R sites}(W rho(0) W^dagger), W = (I (x) U) exp(-iHt).
Matrix oracle_pipeline(const ChainSpec& chain, const ZeroCoherenceState& sender, double t,
                       const ReceiverUnitaryParams& params, int n_receiver);

/// Random valid zero-coherence density matrix: block k = A A^dagger with
/// Gaussian A, then normalized to unit total trace.
ZeroCoherenceState random_zero_coherence_state(int n, int max_excitation, std::uint64_t seed);

struct OracleBatteryConfig {
  int configurations = 100;
  int min_sites = 2;
  int max_sites = 8;
  double tolerance = 1e-10;
  std::uint64_t seed = 0;
  CouplingMode coupling_mode = CouplingMode::full_dipolar;
  /// Test fixture: run the block pipeline with this mode instead, which
  /// should make the battery fail.
  std::optional<CouplingMode> corrupt_block_coupling;
};

struct OracleCase {
  int n_sites = 0;
  int n_sender = 0;
  int n_receiver = 0;
  int n_extended = 0;
  int max_excitation = 0;
  double t = 0.0;
  double max_abs_diff = 0.0;
  int worst_row = 0;  ///< dense receiver index of the largest discrepancy
  int worst_col = 0;
};

struct OracleReport {
  std::vector<OracleCase> cases;
  double max_deviation = 0.0;
  int failures = 0;
  std::string first_failure;
  bool passed() const { return failures == 0; }
};

/// Randomized block-pipeline vs oracle agreement over sampled layouts,
/// sender states, angles and times t in [0, 2N].
OracleReport run_oracle_battery(const OracleBatteryConfig& config);

std::string describe(const OracleCase& c);

}  // namespace ptz
