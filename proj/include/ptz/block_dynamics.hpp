#pragma once

#include "ptz/chain_model.hpp"
#include "ptz/excitation_basis.hpp"
#include "ptz/receiver_unitary.hpp"
#include "ptz/types.hpp"

#include <span>
#include <vector>

namespace ptz {

/// Eigen-decompositions H^(k) = Q diag(lambda) Q^T of the sector blocks
/// 0..max_k of one chain. Sector Hamiltonians are real symmetric, so Q is
/// real orthogonal. Immutable after construction; share freely.
class SpectralCache {
 public:
  /// Dense eigensolves beyond this sector dimension are refused (memory).
  static constexpr std::size_t kMaxSectorDim = 20000;

  SpectralCache(const ChainSpec& chain, int max_k);

  const ChainSpec& chain() const { return chain_; }
  int max_excitations() const { return static_cast<int>(sectors_.size()) - 1; }
  bool has_sector(int k) const { return k >= 0 && k <= max_excitations(); }

  const ExcitationBasis& basis(int k) const { return sector(k).basis; }
  const RealVector& eigenvalues(int k) const { return sector(k).eigenvalues; }
  const RealMatrix& eigenvectors(int k) const { return sector(k).eigenvectors; }

  /// ||H - Q Lambda Q^T||_F / ||H||_F for sector k (rebuilds H; test use).
  double reconstruction_residual(int k) const;

 private:
  struct Sector {
    ExcitationBasis basis;
    RealVector eigenvalues;
    RealMatrix eigenvectors;
  };
  const Sector& sector(int k) const;

  ChainSpec chain_;
  std::vector<Sector> sectors_;
};

/// Symmetric eigendecomposition through LAPACK dsyevd; `a` is overwritten
/// with the eigenvectors.
RealVector symmetric_eigensolve(RealMatrix& a);

/// V^(k)(t) = Q diag(exp(-i lambda t)) Q^T.
Matrix propagator_block(const SpectralCache& cache, int k, double t);

/// Selected columns of V^(k)(t); O(D^2 |cols|).
Matrix propagator_columns(const SpectralCache& cache, int k, double t, std::span<const std::size_t> cols);

Complex propagator_element(const SpectralCache& cache, int k, double t, std::size_t row, std::size_t col);

/// Chain k-states grouped by their occupation of the first N - n_tail sites.
/// Within a group the tail holds a fixed number j of excitations and the
/// tail patterns run over the full j-excitation basis of the tail.
struct TailGrouping {
  struct Group {
    int tail_excitations = 0;
    std::vector<std::size_t> rows;   ///< chain ordinals
    std::vector<std::size_t> local;  ///< tail-basis ordinals, aligned with rows
  };
  int n_tail = 0;
  std::vector<Group> groups;
};

TailGrouping group_by_tail(const ExcitationBasis& chain_basis, int n_tail);

/// columns <- E_k(U) columns, where E_k(U) acts with U^(j) on the
/// extended-receiver pattern of each group and as identity elsewhere.
void apply_embedded_unitary(const TailGrouping& er_groups, const ReceiverUnitaryParams& params, Matrix& columns);

/// Dense E_k(U) on the chain k-sector.
Matrix embedded_unitary(const ExcitationBasis& chain_basis, const ReceiverUnitaryParams& params);

/// W^(k)(t, phi) = E_k(U(phi)) V^(k)(t).
Matrix combined_block(const SpectralCache& cache, const ReceiverUnitaryParams& params, int k, double t);

/// <{N-1,N}| V^(2)(t) |{1,2}>, the two-excitation sender-to-receiver amplitude.
Complex two_excitation_transfer_amplitude(const SpectralCache& cache, double t);

}  // namespace ptz
