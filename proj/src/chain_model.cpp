#include "ptz/chain_model.hpp"

#include "ptz/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace ptz {

std::string_view to_string(CouplingMode mode) {
  switch (mode) {
    case CouplingMode::nearest_neighbor: return "nearest-neighbor";
    case CouplingMode::full_dipolar: return "full-dipolar";
  }
  return "unknown";
}

CouplingMode coupling_mode_from_string(std::string_view name) {
  if (name == "nearest-neighbor") return CouplingMode::nearest_neighbor;
  if (name == "full-dipolar") return CouplingMode::full_dipolar;
  throw DomainError("unknown coupling mode '" + std::string(name) + "'");
}

void ChainSpec::validate() const {
  if (n_sites < 1) throw DomainError("chain: n_sites must be positive");
}

double ChainSpec::coupling(int i, int j) const {
  const int d = std::abs(i - j);
  if (d == 0) return 0.0;
  switch (coupling_mode) {
    case CouplingMode::nearest_neighbor: return d == 1 ? 1.0 : 0.0;
    case CouplingMode::full_dipolar: return 1.0 / (static_cast<double>(d) * d * d);
  }
  return 0.0;
}

RealMatrix build_hamiltonian_block(const ChainSpec& spec, const ExcitationBasis& basis) {
  spec.validate();
  if (basis.n_sites() != spec.n_sites) {
    throw DomainError("build_hamiltonian_block: basis has " + std::to_string(basis.n_sites()) +
                      " sites, chain has " + std::to_string(spec.n_sites));
  }
  const auto dim = static_cast<Eigen::Index>(basis.size());
  RealMatrix h = RealMatrix::Zero(dim, dim);
  const int n = spec.n_sites;
  std::vector<char> occupied(n + 1, 0);
  SiteSet moved;
  for (Eigen::Index a = 0; a < dim; ++a) {
    const SiteSet& src = basis.state(a);
    for (int s : src) occupied[s] = 1;
    for (std::size_t slot = 0; slot < src.size(); ++slot) {
      const int from = src[slot];
      for (int to = 1; to <= n; ++to) {
        if (occupied[to]) continue;
        const double d = spec.coupling(from, to);
        if (d == 0.0) continue;
        moved = src;
        moved[slot] = to;
        std::sort(moved.begin(), moved.end());
        h(static_cast<Eigen::Index>(basis.index_of(moved)), a) = 0.5 * d;
      }
    }
    for (int s : src) occupied[s] = 0;
  }
  return h;
}

BlockOperator build_hamiltonian(const ChainSpec& spec, int max_k) {
  spec.validate();
  if (max_k < 0 || max_k > spec.n_sites) throw DomainError("build_hamiltonian: sector out of range");
  BlockOperator op;
  op.kind = BlockKind::hamiltonian;
  for (int k = 0; k <= max_k; ++k) {
    op.sector_blocks.emplace(k, build_hamiltonian_block(spec, ExcitationBasis(spec.n_sites, k)).cast<Complex>());
  }
  return op;
}

bool excitation_conservation_check(const ChainSpec& spec, int max_sites) {
  if (spec.n_sites > max_sites || spec.n_sites > FullStateOracle::kMaxSites) return false;
  const FullStateOracle oracle(spec);
  const Matrix& h = oracle.hamiltonian();
  const Matrix iz = oracle.total_iz();
  const Matrix comm = h * iz - iz * h;
  return comm.norm() < 1e-12;
}

}  // namespace ptz
