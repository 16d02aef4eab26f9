#include "doctest.h"

#include "ptz/block_dynamics.hpp"
#include "ptz/oracle.hpp"
#include "support.hpp"

#include <cmath>

using namespace ptz;

TEST_SUITE("block-dynamics") {

TEST_CASE("eigendecomposition reconstructs every sector") {
  const SpectralCache cache({9}, 3);
  for (int k = 0; k <= 3; ++k) CHECK(cache.reconstruction_residual(k) < 1e-13);
}

TEST_CASE("propagator at t = 0 is the identity") {
  const SpectralCache cache({7}, 2);
  for (int k = 0; k <= 2; ++k) {
    const Matrix v = propagator_block(cache, k, 0.0);
    CHECK(v.isApprox(Matrix::Identity(v.rows(), v.cols())));
  }
}

TEST_CASE("two-site propagator in closed form") {
  const SpectralCache cache({2, CouplingMode::nearest_neighbor}, 1);
  for (double t : {0.3, 1.7, 6.0}) {
    Matrix expected(2, 2);
    expected << std::cos(t / 2), -kI * std::sin(t / 2), -kI * std::sin(t / 2), std::cos(t / 2);
    CHECK(max_abs_diff(propagator_block(cache, 1, t), expected) < 1e-14);
  }
}

TEST_CASE("two-excitation propagator matches the dense exponential") {
  const ChainSpec chain{6};
  const SpectralCache cache(chain, 2);
  const Matrix dense = FullStateOracle(chain).propagator(3.7);
  CHECK(max_abs_diff(propagator_block(cache, 2, 3.7), test::sector_of(dense, 6, 2)) < 1e-10);
}

TEST_CASE("selected columns and single elements agree with the full block") {
  const SpectralCache cache({8}, 2);
  const Matrix v = propagator_block(cache, 2, 4.2);
  const std::vector<std::size_t> cols = {0, 5, 27};
  const Matrix c = propagator_columns(cache, 2, 4.2, cols);
  for (std::size_t j = 0; j < cols.size(); ++j) CHECK(max_abs_diff(c.col(j), v.col(cols[j])) < 1e-13);
  CHECK(std::abs(propagator_element(cache, 2, 4.2, 27, 0) - v(27, 0)) < 1e-13);
  CHECK(unitarity_defect(v) < 1e-12);
}

TEST_CASE("combined block") {
  const ChainSpec chain{5};
  const SpectralCache cache(chain, 2);
  SUBCASE("zero angles leave the propagator") {
    CHECK(max_abs_diff(combined_block(cache, ReceiverUnitaryParams(2, 1), 1, 2.0), propagator_block(cache, 1, 2.0)) < 1e-14);
  }
  SUBCASE("vacuum sector is the scalar 1") {
    const Matrix w0 = combined_block(cache, test::random_params(2, 1, 5), 0, 2.0);
    REQUIRE(w0.size() == 1);
    CHECK(std::abs(w0(0, 0) - 1.0) < 1e-15);
  }
  SUBCASE("matches (I x U) exp(-iHt) from the dense model") {
    const auto params = test::random_params(2, 1, 17);
    const FullStateOracle oracle(chain);
    const Matrix dense = oracle.receiver_unitary(params) * oracle.propagator(2.0);
    CHECK(max_abs_diff(combined_block(cache, params, 1, 2.0), test::sector_of(dense, 5, 1)) < 1e-10);
  }
}

TEST_CASE("two-excitation transfer amplitude") {
  SUBCASE("vanishes at t = 0") {
    for (int n : {4, 7}) CHECK(std::abs(two_excitation_transfer_amplitude(SpectralCache({n}, 2), 0.0)) < 1e-15);
  }
  SUBCASE("matches the dense amplitude") {
    const ChainSpec chain{6};
    const Matrix dense = FullStateOracle(chain).propagator(5.0);
    // <{5,6}| V |{1,2}>
    const Complex expected = dense(test::dense_index({5, 6}, 6), test::dense_index({1, 2}, 6));
    CHECK(std::abs(two_excitation_transfer_amplitude(SpectralCache(chain, 2), 5.0) - expected) < 1e-10);
  }
  SUBCASE("published N = 10 registration time is a local maximum") {
    const SpectralCache cache({10}, 2);
    const auto p = [&](double t) { return std::norm(two_excitation_transfer_amplitude(cache, t)); };
    const double t0 = 12.8896;
    CHECK(p(t0) > p(t0 - 0.02));
    CHECK(p(t0) > p(t0 + 0.02));
  }
}

TEST_CASE("oversized sectors are refused") {
  CHECK_THROWS_AS(SpectralCache({60}, 3), CapacityError);
}

}  // TEST_SUITE
