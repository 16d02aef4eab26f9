#include "ptz/excitation_basis.hpp"

#include "ptz/types.hpp"

#include <limits>
#include <string>

namespace ptz {

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  unsigned __int128 result = 1;
  for (int i = 1; i <= k; ++i) {
    result = result * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (result > std::numeric_limits<std::uint64_t>::max()) {
      throw DomainError("binomial(" + std::to_string(n) + ", " + std::to_string(k) + ") overflows");
    }
  }
  return static_cast<std::uint64_t>(result);
}

ExcitationBasis::ExcitationBasis(int n_sites, int k_excitations) : n_sites_(n_sites), k_(k_excitations) {
  if (n_sites < 1) throw DomainError("excitation basis: n_sites must be positive");
  if (k_excitations < 0 || k_excitations > n_sites) {
    throw DomainError("excitation basis: k=" + std::to_string(k_excitations) + " outside [0, " +
                      std::to_string(n_sites) + "]");
  }
  states_.reserve(binomial(n_sites, k_excitations));

  // Odometer over increasing tuples; advances the rightmost slot that can move.
  SiteSet current(k_);
  for (int i = 0; i < k_; ++i) current[i] = i + 1;
  while (true) {
    states_.push_back(current);
    int slot = k_ - 1;
    while (slot >= 0 && current[slot] == n_sites_ - (k_ - 1 - slot)) --slot;
    if (slot < 0) break;
    ++current[slot];
    for (int j = slot + 1; j < k_; ++j) current[j] = current[j - 1] + 1;
  }
}

std::optional<std::size_t> ExcitationBasis::find(std::span<const int> sites) const {
  if (static_cast<int>(sites.size()) != k_) return std::nullopt;
  int previous = 0;
  std::uint64_t rank = 0;
  for (int i = 0; i < k_; ++i) {
    const int c = sites[i];
    if (c <= previous || c > n_sites_) return std::nullopt;
    // Count tuples that agree on the first i slots but place a smaller value at slot i.
    for (int v = previous + 1; v < c; ++v) rank += binomial(n_sites_ - v, k_ - 1 - i);
    previous = c;
  }
  return static_cast<std::size_t>(rank);
}

std::size_t ExcitationBasis::index_of(std::span<const int> sites) const {
  auto idx = find(sites);
  if (!idx) throw DomainError("index_of: pattern is not a state of this basis");
  return *idx;
}

ExcitationBasis enumerate_basis(int n_sites, int k) { return ExcitationBasis(n_sites, k); }

SubsystemEmbedding embed_subsystem(const ExcitationBasis& parent, SiteRange child_sites) {
  if (child_sites.first < 1 || child_sites.last > parent.n_sites() || child_sites.first > child_sites.last) {
    throw DomainError("embed_subsystem: child sites [" + std::to_string(child_sites.first) + ", " +
                      std::to_string(child_sites.last) + "] outside parent range 1.." +
                      std::to_string(parent.n_sites()));
  }
  if (parent.excitations() > child_sites.size()) {
    throw DomainError("embed_subsystem: child range cannot hold " + std::to_string(parent.excitations()) +
                      " excitations");
  }
  SubsystemEmbedding emb;
  emb.child_sites = child_sites;
  emb.child_basis = ExcitationBasis(child_sites.size(), parent.excitations());
  emb.row_map.reserve(emb.child_basis.size());
  const int offset = child_sites.first - 1;
  SiteSet shifted(parent.excitations());
  for (const auto& local : emb.child_basis.states()) {
    for (std::size_t i = 0; i < local.size(); ++i) shifted[i] = local[i] + offset;
    emb.row_map.push_back(parent.index_of(shifted));
  }
  return emb;
}

SubsystemEmbedding embed_subsystem(const ExcitationBasis& parent, std::span<const int> child_sites) {
  if (child_sites.empty()) throw DomainError("embed_subsystem: empty child site list");
  for (std::size_t i = 1; i < child_sites.size(); ++i) {
    if (child_sites[i] != child_sites[i - 1] + 1) {
      throw DomainError("embed_subsystem: child sites must be contiguous and ascending");
    }
  }
  return embed_subsystem(parent, SiteRange{child_sites.front(), child_sites.back()});
}

}  // namespace ptz
