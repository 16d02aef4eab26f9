#include "doctest.h"

#include <unsupported/Eigen/MatrixFunctions>

#include "ptz/block_dynamics.hpp"
#include "ptz/chain_model.hpp"

#include <cmath>

using namespace ptz;

TEST_SUITE("chain-model") {

TEST_CASE("two-site nearest-neighbour block") {
  const RealMatrix h = build_hamiltonian_block({2, CouplingMode::nearest_neighbor}, ExcitationBasis(2, 1));
  RealMatrix expected(2, 2);
  expected << 0.0, 0.5, 0.5, 0.0;
  CHECK((h - expected).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("vacuum block is a 1x1 zero") {
  for (int n : {2, 5, 9}) {
    const RealMatrix h = build_hamiltonian_block({n}, ExcitationBasis(n, 0));
    REQUIRE(h.rows() == 1);
    CHECK(h(0, 0) == 0.0);
  }
}

TEST_CASE("full dipolar couplings decay as the cube of the distance") {
  const RealMatrix h = build_hamiltonian_block({3, CouplingMode::full_dipolar}, ExcitationBasis(3, 1));
  CHECK(h(0, 1) == doctest::Approx(0.5));
  CHECK(h(1, 2) == doctest::Approx(0.5));
  CHECK(h(0, 2) == doctest::Approx(1.0 / 16.0));
  CHECK(h.isApprox(h.transpose()));
  CHECK(h.diagonal().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nearest neighbour drops longer bonds") {
  const ChainSpec nn{5, CouplingMode::nearest_neighbor};
  CHECK(nn.coupling(2, 3) == 1.0);
  CHECK(nn.coupling(1, 3) == 0.0);
  CHECK(ChainSpec{5}.coupling(1, 4) == doctest::Approx(1.0 / 27.0));
  CHECK(ChainSpec{}.coupling_mode == CouplingMode::full_dipolar);
}

TEST_CASE("excitation number is conserved") {
  CHECK(excitation_conservation_check({4, CouplingMode::nearest_neighbor}));
  CHECK(excitation_conservation_check({4, CouplingMode::full_dipolar}));
  CHECK(excitation_conservation_check({6, CouplingMode::full_dipolar}));
}

TEST_CASE("coupling mode names round-trip") {
  for (auto m : {CouplingMode::nearest_neighbor, CouplingMode::full_dipolar})
    CHECK(coupling_mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(coupling_mode_from_string("xxz"), DomainError);
  CHECK_THROWS_AS(ChainSpec{0}.validate(), DomainError);
}

TEST_CASE("registration observables do not see the sign of H") {
  // |exp(-iHt)| == |exp(+iHt)| elementwise; the flipped propagator comes from a dense expm.
  const ChainSpec spec{8};
  const SpectralCache cache(spec, 2);
  for (int k : {1, 2}) {
    const Matrix h = build_hamiltonian_block(spec, cache.basis(k)).cast<Complex>();
    for (double t : {3.1, 8.7, 10.4}) {
      const Matrix flipped = (Complex(0.0, t) * h).exp();
      CHECK(propagator_block(cache, k, t).cwiseAbs().isApprox(flipped.cwiseAbs(), 1e-10));
    }
  }
}

}  // TEST_SUITE
