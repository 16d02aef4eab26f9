#include "doctest.h"

#include "ptz/block_dynamics.hpp"
#include "ptz/coherence_states.hpp"
#include "ptz/oracle.hpp"
#include "support.hpp"

#include <cmath>

using namespace ptz;

namespace {

std::vector<ExcitationBasis> bases(int n, int k) {
  std::vector<ExcitationBasis> b;
  for (int j = 0; j <= k; ++j) b.emplace_back(n, j);
  return b;
}

}  // namespace

TEST_SUITE("coherence-states") {

TEST_CASE("vacuum sender embeds as the chain vacuum") {
  const auto b = bases(6, 2);
  const ChainState cs = embed_initial_state(ZeroCoherenceState::vacuum(2, 2), b);
  CHECK(std::abs(cs[0](0, 0) - 1.0) < 1e-15);
  CHECK(cs[1].cwiseAbs().maxCoeff() == 0.0);
  CHECK(cs[2].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("embedding matches rho_S x |0><0| of the dense model") {
  const ChainSpec chain{6};
  const ZeroCoherenceState s = random_zero_coherence_state(2, 2, 42);
  const auto b = bases(6, 2);
  const ChainState cs = embed_initial_state(s, b);
  Complex trace = 0.0;
  for (const auto& m : cs) trace += m.trace();
  CHECK(std::abs(trace - 1.0) < 1e-13);
  const Matrix dense = FullStateOracle(chain).initial_state(s);
  for (int k = 0; k <= 2; ++k) CHECK(max_abs_diff(cs[k], test::sector_of(dense, 6, k)) < 1e-12);
}

TEST_CASE("partial trace") {
  const ChainSpec chain{6};
  const SpectralCache cache(chain, 2);
  const auto b = bases(6, 2);
  const ZeroCoherenceState s = random_zero_coherence_state(2, 2, 7);

  SUBCASE("at t = 0 the receiver is in its ground state") {
    const ZeroCoherenceState r = partial_trace_to_receiver(embed_initial_state(s, b), b, 2);
    CHECK(std::abs(r.block(0)(0, 0) - 1.0) < 1e-13);
    CHECK(r.block(1).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(r.block(2).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("evolved state matches the dense partial trace") {
    ChainState cs = embed_initial_state(s, b);
    for (int k = 0; k <= 2; ++k) {
      const Matrix v = propagator_block(cache, k, 2.5);
      cs[k] = v * cs[k] * v.adjoint();
    }
    const ZeroCoherenceState r = partial_trace_to_receiver(cs, b, 2);
    CHECK(std::abs(r.trace() - 1.0) < 1e-12);
    const Matrix dense = oracle_pipeline(chain, s, 2.5, ReceiverUnitaryParams(2, 0), 2);
    CHECK(max_abs_diff(to_dense(r), dense) < 1e-10);
  }
}

TEST_CASE("exchange unitary") {
  SUBCASE("swaps the vacuum with the target element") {
    ZeroCoherenceState s(2, 1);
    s.block(0)(0, 0) = 0.3;
    s.block(1)(0, 0) = 0.5;
    s.block(1)(1, 1) = 0.2;
    const ZeroCoherenceState r = apply_exchange_unitary(s, {1, 0});
    CHECK(r.block(0)(0, 0).real() == doctest::Approx(0.5));
    CHECK(r.block(1)(0, 0).real() == doctest::Approx(0.3));
    CHECK(r.block(1)(1, 1).real() == doctest::Approx(0.2));
    CHECK(max_abs_diff(to_dense(apply_exchange_unitary(r, {1, 0})), to_dense(s)) == 0.0);
  }
  SUBCASE("vacuum moves to the target") {
    const ZeroCoherenceState r = apply_exchange_unitary(ZeroCoherenceState::vacuum(2, 1), {1, 0});
    CHECK(std::abs(r.block(0)(0, 0)) < 1e-15);
    CHECK(std::abs(r.block(1)(0, 0) - 1.0) < 1e-15);
  }
  SUBCASE("refuses targets with coherences") {
    ZeroCoherenceState s = ZeroCoherenceState::maximally_mixed(2);
    s.block(1)(0, 1) = s.block(1)(1, 0) = 0.1;
    CHECK_THROWS_AS(apply_exchange_unitary(s, {1, 0}), PreconditionViolation);
  }
}

TEST_CASE("deviation from the asymptotic state") {
  const auto vac = AsymptoticPTZ::vacuum_concentrated(2, 2);
  CHECK(deviation(vac.state(), vac) == 0.0);
  const auto swapped = AsymptoticPTZ::swapped_concentrated(2, 2, {2, 0});
  CHECK(deviation(ZeroCoherenceState::vacuum(2, 2), swapped) == doctest::Approx(std::sqrt(2.0)));
  CHECK(deviation(ZeroCoherenceState::maximally_mixed(2), vac) == doctest::Approx(std::sqrt(0.75)));
}

TEST_CASE("density validation") {
  CHECK_NOTHROW(random_zero_coherence_state(3, 2, 1).validate_density());
  ZeroCoherenceState s = ZeroCoherenceState::maximally_mixed(2);
  s.block(0)(0, 0) += 0.5;
  CHECK_THROWS_AS(s.validate_density(), InfeasibleStateError);
  ZeroCoherenceState neg = ZeroCoherenceState::vacuum(1, 1);
  neg.block(0)(0, 0) = 1.5;
  neg.block(1)(0, 0) = -0.5;
  CHECK_THROWS_AS(neg.validate_density(), InfeasibleStateError);
}

}  // TEST_SUITE
