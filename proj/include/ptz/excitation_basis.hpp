#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ptz {

/// Sorted, 1-based indices of the excited sites of a basis state.
using SiteSet = std::vector<int>;

/// Binomial coefficient C(n, k); zero outside 0 <= k <= n.
std::uint64_t binomial(int n, int k);

/// Inclusive, 1-based contiguous site interval.
struct SiteRange {
  int first = 1;
  int last = 0;

  int size() const { return last - first + 1; }
  bool contains(int site) const { return site >= first && site <= last; }
  bool operator==(const SiteRange&) const = default;
};

/// The k-excitation states of an n-site chain in lexicographic order of their
/// excited-site tuples: for (4, 2) the order is {1,2},{1,3},{1,4},{2,3},{2,4},{3,4}.
/// Every "element (1,1)" of a sector block refers to the first state of this
/// ordering. Ranking uses the combinatorial number system, so no lookup table
/// is stored and n is not limited by a machine word.
class ExcitationBasis {
 public:
  ExcitationBasis() = default;
  ExcitationBasis(int n_sites, int k_excitations);

  int n_sites() const { return n_sites_; }
  int excitations() const { return k_; }
  std::size_t size() const { return states_.size(); }

  const SiteSet& state(std::size_t ordinal) const { return states_.at(ordinal); }
  const std::vector<SiteSet>& states() const { return states_; }

  /// Lexicographic rank of `sites`. Throws DomainError when `sites` is not a
  /// strictly increasing k-tuple within 1..n_sites.
  std::size_t index_of(std::span<const int> sites) const;
  std::optional<std::size_t> find(std::span<const int> sites) const;

 private:
  int n_sites_ = 0;
  int k_ = 0;
  std::vector<SiteSet> states_;
};

ExcitationBasis enumerate_basis(int n_sites, int k);

/// Maps the k-excitation states of a contiguous child site range into the
/// parent basis; the child state keeps its excited sites and every site
/// outside the child range stays unexcited.
struct SubsystemEmbedding {
  ExcitationBasis child_basis;  ///< local sites 1..|child_sites|
  SiteRange child_sites;        ///< parent numbering
  std::vector<std::size_t> row_map;
};

SubsystemEmbedding embed_subsystem(const ExcitationBasis& parent, SiteRange child_sites);

/// Validating overload for an explicit site list; it must be contiguous and
/// ascending.
SubsystemEmbedding embed_subsystem(const ExcitationBasis& parent, std::span<const int> child_sites);

}  // namespace ptz
