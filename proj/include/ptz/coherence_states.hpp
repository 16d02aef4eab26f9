#pragma once

#include "ptz/excitation_basis.hpp"
#include "ptz/types.hpp"

#include <vector>

namespace ptz {

/// Block-diagonal density matrix diag(s^(0), ..., s^(K)) of an n-site
/// subsystem; block k is C(n, k) x C(n, k) in ExcitationBasis(n, k) order.
class ZeroCoherenceState {
 public:
  ZeroCoherenceState() = default;
  /// Zero blocks 0..max_excitation.
  ZeroCoherenceState(int subsystem_size, int max_excitation);

  static ZeroCoherenceState vacuum(int subsystem_size, int max_excitation);
  static ZeroCoherenceState maximally_mixed(int subsystem_size);

  int subsystem_size() const { return n_; }
  int max_excitation() const { return static_cast<int>(blocks_.size()) - 1; }
  int block_dim(int k) const;

  const Matrix& block(int k) const;
  Matrix& block(int k);
  const std::vector<Matrix>& blocks() const { return blocks_; }

  Complex trace() const;
  /// Smallest eigenvalue over all blocks.
  double min_eigenvalue() const;
  double max_hermiticity_defect() const;

  bool same_layout(const ZeroCoherenceState& other) const;
  /// Checks Hermiticity (1e-12), unit trace (1e-12) and positivity (-1e-10).
  void validate_density(double hermitian_tol = 1e-12, double trace_tol = 1e-12, double psd_tol = -1e-10) const;

  ZeroCoherenceState& operator+=(const ZeroCoherenceState& other);
  ZeroCoherenceState& operator*=(Complex scale);

 private:
  int n_ = 0;
  std::vector<Matrix> blocks_;
};

ZeroCoherenceState operator+(ZeroCoherenceState a, const ZeroCoherenceState& b);
ZeroCoherenceState operator-(ZeroCoherenceState a, const ZeroCoherenceState& b);
ZeroCoherenceState operator*(Complex scale, ZeroCoherenceState a);

/// Frobenius norm of the block-diagonal matrix.
double frobenius_norm(const ZeroCoherenceState& s);

/// Dense 2^n matrix in the computational basis; site 1 is the most
/// significant bit of the basis index.
Matrix to_dense(const ZeroCoherenceState& s);

/// Position of one diagonal element: sector `block`, 0-based `ordinal` in the
/// lexicographic basis of that sector. The 1-based "(1,1)" element of a
/// block is ordinal 0.
struct BlockAddress {
  int block = 0;
  int ordinal = 0;
  bool operator==(const BlockAddress&) const = default;
};

/// Limiting state of a perfectly transferred 0-order coherence matrix: a
/// single unit diagonal entry.
struct AsymptoticPTZ {
  enum class Variant { vacuum_concentrated, swapped_concentrated };

  Variant variant = Variant::vacuum_concentrated;
  int subsystem_size = 0;
  int max_excitation = 0;
  BlockAddress unit;

  static AsymptoticPTZ vacuum_concentrated(int subsystem_size, int max_excitation);
  /// Unit on the element that the exchange unitary moves into the vacuum slot.
  static AsymptoticPTZ swapped_concentrated(int subsystem_size, int max_excitation, BlockAddress swap_target);

  ZeroCoherenceState state() const;
};

/// Per-sector chain density blocks sigma^(0..K).
using ChainState = std::vector<Matrix>;

/// rho^(S) (x) |0..0><0..0| restricted to sectors 0..K of an N-site chain:
/// s^(k) lands on the rows/columns of the sender embedding.
ChainState embed_initial_state(const ZeroCoherenceState& sender, const std::vector<ExcitationBasis>& chain_bases);

/// Traces out sites 1..N-N_R. Receiver block r^(l) collects, from every chain
/// sector i >= l, the receiver-local l-excitation sub-blocks of all groups of
/// states that share the traced-site occupation.
ZeroCoherenceState partial_trace_to_receiver(const ChainState& chain_state, const std::vector<ExcitationBasis>& chain_bases,
                                             int n_receiver);

/// Swaps r^(0) with the diagonal element at `target`. The row and column of
/// the target must otherwise vanish (|entry| <= tol); violation raises
/// PreconditionViolation since the swap would then create coherences.
ZeroCoherenceState apply_exchange_unitary(const ZeroCoherenceState& state, BlockAddress target, double tol = 1e-8);

/// ||reference - state||_F over the block-diagonal layout.
double deviation(const ZeroCoherenceState& state, const AsymptoticPTZ& reference);

}  // namespace ptz
