#pragma once

#include "ptz/excitation_basis.hpp"
#include "ptz/types.hpp"

#include <map>
#include <string>
#include <string_view>

namespace ptz {

enum class CouplingMode { nearest_neighbor, full_dipolar };

std::string_view to_string(CouplingMode mode);
CouplingMode coupling_mode_from_string(std::string_view name);

/// Homogeneous spin-1/2 chain with XX couplings, in units where the
/// nearest-neighbour coupling is 1 (time is measured in its inverse).
/// Full-dipolar is the default: it is the mode that reproduces the published
/// registration-time tables.
struct ChainSpec {
  int n_sites = 0;
  CouplingMode coupling_mode = CouplingMode::full_dipolar;

  /// D_ij for 1-based sites i != j. Non-homogeneous or anisotropic variants
  /// would override this single point.
  double coupling(int i, int j) const;
  void validate() const;
  bool operator==(const ChainSpec&) const = default;
};

enum class BlockKind { hamiltonian, propagator, unitary, generic };

/// Per-excitation-sector square blocks of an operator that commutes with I_z.
struct BlockOperator {
  BlockKind kind = BlockKind::generic;
  std::map<int, Matrix> sector_blocks;
};

/// H^(k): D_ij/2 between states that differ by moving one excitation from
/// site i to empty site j; zero diagonal. Real symmetric.
RealMatrix build_hamiltonian_block(const ChainSpec& spec, const ExcitationBasis& basis);

/// Blocks H^(0)..H^(max_k).
BlockOperator build_hamiltonian(const ChainSpec& spec, int max_k);

/// Model self-test: assembles the full 2^N Hamiltonian with the dense oracle
/// and checks ||[H, I_z]|| < 1e-12. Limited to N <= 10.
bool excitation_conservation_check(const ChainSpec& spec, int max_sites = 10);

}  // namespace ptz
