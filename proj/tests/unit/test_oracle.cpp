#include "doctest.h"

#include "ptz/oracle.hpp"
#include "ptz/transfer_maps.hpp"
#include "support.hpp"

#include <chrono>

using namespace ptz;

TEST_SUITE("oracle") {

TEST_CASE("dense Hamiltonian is Hermitian and conserves I_z") {
  const FullStateOracle o(ChainSpec{5});
  CHECK(hermiticity_defect(o.hamiltonian()) < 1e-15);
  const Matrix c = o.hamiltonian() * o.total_iz() - o.total_iz() * o.hamiltonian();
  CHECK(c.cwiseAbs().maxCoeff() < 1e-13);
  CHECK(unitarity_defect(o.propagator(1.3)) < 1e-12);
}

TEST_CASE("receiver starts in its ground state") {
  const ZeroCoherenceState s = random_zero_coherence_state(2, 2, 3);
  const Matrix r = oracle_pipeline(ChainSpec{6}, s, 0.0, ReceiverUnitaryParams(3, 0), 2);
  Matrix ground = Matrix::Zero(4, 4);
  ground(0, 0) = 1.0;
  CHECK(max_abs_diff(r, ground) < 1e-13);
}

TEST_CASE("vacuum stays vacuum") {
  const auto params = test::random_params(3, 3, 4);
  for (double t : {0.7, 5.0}) {
    const Matrix r = oracle_pipeline(ChainSpec{6}, ZeroCoherenceState::vacuum(2, 2), t, params, 3);
    CHECK(std::abs(r(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(r.trace() - 1.0) < 1e-12);
  }
}

TEST_CASE("seven-site block pipeline equals the dense model") {
  auto cache = std::make_shared<const SpectralCache>(ChainSpec{7}, 2);
  const TransferPipeline p(cache, {7, 2, 2, 3}, 2);
  const auto params = test::random_params(3, 2, 77);
  const ZeroCoherenceState s = random_zero_coherence_state(2, 2, 78);
  const Matrix dense = oracle_pipeline(ChainSpec{7}, s, 6.1, params, 2);
  CHECK(max_abs_diff(to_dense(p.receiver_state(s, 6.1, params)), dense) < 1e-10);
}

TEST_CASE("minimal battery passes quickly") {
  OracleBatteryConfig cfg;
  cfg.configurations = 10;
  cfg.min_sites = 4;
  cfg.max_sites = 4;
  const auto start = std::chrono::steady_clock::now();
  const OracleReport rep = run_oracle_battery(cfg);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 1.0);
  CHECK(rep.passed());
  CHECK(rep.max_deviation < 1e-10);
}

TEST_CASE("corrupted coupling is caught and localized") {
  OracleBatteryConfig cfg;
  cfg.configurations = 10;
  cfg.min_sites = 4;
  cfg.max_sites = 6;
  cfg.corrupt_block_coupling = CouplingMode::nearest_neighbor;
  const OracleReport rep = run_oracle_battery(cfg);
  CHECK_FALSE(rep.passed());
  CHECK(rep.failures > 0);
  CHECK(rep.first_failure.find("N=") != std::string::npos);
}

TEST_CASE("dense model is capped") {
  CHECK_THROWS_AS(FullStateOracle(ChainSpec{11}), CapacityError);
}

}  // TEST_SUITE
