#include "doctest.h"

#include "ptz/excitation_basis.hpp"
#include "ptz/types.hpp"

using namespace ptz;

TEST_SUITE("excitation-basis") {

TEST_CASE("vacuum sector holds one empty state") {
  const ExcitationBasis b = enumerate_basis(4, 0);
  REQUIRE(b.size() == 1);
  CHECK(b.state(0).empty());
}

TEST_CASE("two excitations on four sites in lexicographic order") {
  const ExcitationBasis b = enumerate_basis(4, 2);
  const std::vector<SiteSet> expected = {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}};
  CHECK(b.states() == expected);
}

TEST_CASE("sector sizes are binomial") {
  CHECK(enumerate_basis(10, 2).size() == 45);
  CHECK(binomial(10, 2) == 45);
  CHECK(binomial(100, 4) == 3921225);
  CHECK(binomial(5, 7) == 0);
  for (int n = 1; n <= 9; ++n)
    for (int k = 0; k <= n; ++k) CHECK(enumerate_basis(n, k).size() == binomial(n, k));
}

TEST_CASE("index_of inverts state") {
  const ExcitationBasis b(9, 3);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(b.index_of(b.state(i)) == i);
  const std::vector<int> unsorted = {3, 1, 5};
  CHECK_THROWS_AS(b.index_of(unsorted), DomainError);
  const std::vector<int> outside = {1, 2, 10};
  CHECK_FALSE(b.find(outside).has_value());
}

TEST_CASE("rejects impossible sectors") {
  CHECK_THROWS_AS(ExcitationBasis(3, 4), DomainError);
  CHECK_THROWS_AS(ExcitationBasis(3, -1), DomainError);
}

TEST_CASE("embedding of a single site") {
  const ExcitationBasis parent(3, 1);
  const auto e = embed_subsystem(parent, SiteRange{1, 1});
  REQUIRE(e.row_map.size() == 1);
  CHECK(e.row_map[0] == parent.index_of(std::vector<int>{1}));
}

TEST_CASE("leading pair maps to the first parent state") {
  const auto e = embed_subsystem(ExcitationBasis(4, 2), SiteRange{1, 2});
  REQUIRE(e.row_map.size() == 1);
  CHECK(e.row_map[0] == 0);
}

TEST_CASE("receiver block of a six-site chain") {
  const ExcitationBasis parent(6, 1);
  const auto e = embed_subsystem(parent, SiteRange{4, 6});
  CHECK(e.row_map == std::vector<std::size_t>{3, 4, 5});
  const std::vector<int> gap = {4, 6};
  CHECK_THROWS_AS(embed_subsystem(parent, gap), DomainError);
}

}  // TEST_SUITE
