#include "ptz/oracle.hpp"

#include "ptz/block_dynamics.hpp"
#include "ptz/transfer_maps.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace ptz {

namespace {

using Index = Eigen::Index;

int bit_of(int site, int n) { return n - site; }

void require_size(int n) {
  if (n < 1) throw DomainError("oracle: chain must have at least one site");
  if (n > FullStateOracle::kMaxSites) {
    throw CapacityError("oracle: N=" + std::to_string(n) + " exceeds the dense limit of " +
                        std::to_string(FullStateOracle::kMaxSites));
  }
}

}  // namespace

FullStateOracle::FullStateOracle(const ChainSpec& chain) : chain_(chain) {
  chain_.validate();
  const int n = chain_.n_sites;
  require_size(n);
  const Index dim = Index{1} << n;
  h_ = Matrix::Zero(dim, dim);
  // Pauli actions on one qubit: sigma_x |b> = |1-b>, sigma_y |0> = i|1>, sigma_y |1> = -i|0>.
  for (Index b = 0; b < dim; ++b) {
    for (int i = 1; i <= n; ++i) {
      for (int j = i + 1; j <= n; ++j) {
        const Index mi = Index{1} << bit_of(i, n);
        const Index mj = Index{1} << bit_of(j, n);
        const Index flipped = b ^ mi ^ mj;
        const Complex yi = (b & mi) ? -kI : kI;
        const Complex yj = (b & mj) ? -kI : kI;
        const double d = chain_.coupling(i, j);
        h_(flipped, b) += d * 0.25 * (1.0 + yi * yj);
      }
    }
  }
}

Matrix FullStateOracle::total_iz() const {
  const int n = chain_.n_sites;
  const Index dim = Index{1} << n;
  Matrix iz = Matrix::Zero(dim, dim);
  for (Index b = 0; b < dim; ++b) {
    double z = 0.0;
    for (int s = 0; s < n; ++s) z += (b >> s & 1) ? 0.5 : -0.5;
    iz(b, b) = z;
  }
  return iz;
}

Matrix FullStateOracle::propagator(double t) const {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("oracle: time must be finite and non-negative");
  const Matrix a = (-kI * t) * h_;
  return a.exp();
}

Matrix FullStateOracle::receiver_unitary(const ReceiverUnitaryParams& params) const {
  const int n = chain_.n_sites;
  const int ner = params.n_er();
  if (ner < 1 || ner > n) throw DomainError("oracle: extended receiver larger than chain");
  const Index local_dim = Index{1} << ner;
  Matrix u = Matrix::Identity(local_dim, local_dim);
  for (int k = 1; k <= params.active_blocks(); ++k) {
    const ExcitationBasis basis(ner, k);
    const Matrix block = build_unitary_block(params, k);
    std::vector<Index> idx(basis.size());
    for (std::size_t a = 0; a < basis.size(); ++a) {
      Index v = 0;
      for (int s : basis.state(a)) v |= Index{1} << bit_of(s, ner);
      idx[a] = v;
    }
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t c = 0; c < idx.size(); ++c)
        u(idx[a], idx[c]) = block(static_cast<Index>(a), static_cast<Index>(c));
  }
  const Index dim = Index{1} << n;
  Matrix full = Matrix::Zero(dim, dim);
  for (Index h = 0; h < (Index{1} << (n - ner)); ++h)
    for (Index a = 0; a < local_dim; ++a)
      for (Index c = 0; c < local_dim; ++c) full((h << ner) | a, (h << ner) | c) = u(a, c);
  return full;
}

Matrix FullStateOracle::initial_state(const ZeroCoherenceState& sender) const {
  const int n = chain_.n_sites;
  const int ns = sender.subsystem_size();
  if (ns > n) throw DomainError("oracle: sender larger than chain");
  const Matrix rs = to_dense(sender);
  const Index dim = Index{1} << n;
  const int shift = n - ns;
  Matrix rho = Matrix::Zero(dim, dim);
  for (Index a = 0; a < rs.rows(); ++a)
    for (Index c = 0; c < rs.cols(); ++c) rho(a << shift, c << shift) = rs(a, c);
  return rho;
}

Matrix dense_partial_trace(const Matrix& rho, int n_sites, int n_keep) {
  if (n_keep < 1 || n_keep > n_sites) throw DomainError("dense_partial_trace: kept size outside [1, N]");
  const Index dim = Index{1} << n_sites;
  if (rho.rows() != dim || rho.cols() != dim) throw DomainError("dense_partial_trace: matrix is not 2^N square");
  const Index keep_dim = Index{1} << n_keep;
  const Index traced_dim = Index{1} << (n_sites - n_keep);
  Matrix out = Matrix::Zero(keep_dim, keep_dim);
  for (Index a = 0; a < keep_dim; ++a)
    for (Index c = 0; c < keep_dim; ++c)
      for (Index h = 0; h < traced_dim; ++h) out(a, c) += rho((h << n_keep) | a, (h << n_keep) | c);
  return out;
}

Matrix oracle_pipeline(const ChainSpec& chain, const ZeroCoherenceState& sender, double t,
                       const ReceiverUnitaryParams& params, int n_receiver) {
  require_size(chain.n_sites);
  const FullStateOracle oracle(chain);
  const Matrix w = oracle.receiver_unitary(params) * oracle.propagator(t);
  const Matrix rho = w * oracle.initial_state(sender) * w.adjoint();
  return dense_partial_trace(rho, chain.n_sites, n_receiver);
}

ZeroCoherenceState random_zero_coherence_state(int n, int max_excitation, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g;
  ZeroCoherenceState s(n, max_excitation);
  for (int k = 0; k <= max_excitation; ++k) {
    const Index d = s.block_dim(k);
    Matrix a(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) a(i, j) = Complex(g(gen), g(gen));
    s.block(k) = a * a.adjoint();
  }
  s *= 1.0 / s.trace().real();
  return s;
}

std::string describe(const OracleCase& c) {
  std::ostringstream os;
  os << "N=" << c.n_sites << " N_S=" << c.n_sender << " N_R=" << c.n_receiver << " N_ER=" << c.n_extended
     << " K=" << c.max_excitation << " t=" << c.t << " max|diff|=" << c.max_abs_diff << " at receiver entry ("
     << c.worst_row << ", " << c.worst_col << ")";
  return os.str();
}

OracleReport run_oracle_battery(const OracleBatteryConfig& config) {
  if (config.configurations < 1) throw DomainError("oracle battery: configuration count must be positive");
  if (config.min_sites < 1 || config.min_sites > config.max_sites) throw DomainError("oracle battery: bad site range");
  require_size(config.max_sites);

  std::mt19937_64 gen(config.seed);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
  OracleReport report;
  for (int c = 0; c < config.configurations; ++c) {
    OracleCase oc;
    oc.n_sites = uniform_int(config.min_sites, config.max_sites);
    oc.n_sender = uniform_int(1, std::min(3, oc.n_sites));
    oc.n_receiver = uniform_int(1, std::min(3, oc.n_sites));
    oc.n_extended = uniform_int(oc.n_receiver, std::min(oc.n_sites, oc.n_receiver + 2));
    oc.max_excitation = uniform_int(0, oc.n_sender);
    oc.t = std::uniform_real_distribution<double>(0.0, 2.0 * oc.n_sites)(gen);

    const ChainSpec chain{oc.n_sites, config.coupling_mode};
    const ChainSpec block_chain{oc.n_sites, config.corrupt_block_coupling.value_or(config.coupling_mode)};
    const ZeroCoherenceState sender = random_zero_coherence_state(oc.n_sender, oc.max_excitation, gen());
    ReceiverUnitaryParams params(oc.n_extended, std::min(oc.max_excitation, oc.n_extended));
    for (int k = 1; k <= params.active_blocks(); ++k) {
      for (auto& a : params.angles(k)) a = std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(gen);
    }

    const auto cache = std::make_shared<const SpectralCache>(block_chain, oc.max_excitation);
    const TransferPipeline pipeline(cache, {oc.n_sites, oc.n_sender, oc.n_receiver, oc.n_extended}, oc.max_excitation);
    const Matrix block_rho = to_dense(pipeline.receiver_state(sender, oc.t, params));
    const Matrix oracle_rho = oracle_pipeline(chain, sender, oc.t, params, oc.n_receiver);

    const RealMatrix diff = (block_rho - oracle_rho).cwiseAbs();
    Index r = 0, col = 0;
    oc.max_abs_diff = diff.maxCoeff(&r, &col);
    oc.worst_row = static_cast<int>(r);
    oc.worst_col = static_cast<int>(col);
    report.max_deviation = std::max(report.max_deviation, oc.max_abs_diff);
    if (!(oc.max_abs_diff < config.tolerance)) {
      if (report.failures == 0) report.first_failure = describe(oc);
      ++report.failures;
    }
    report.cases.push_back(oc);
  }
  return report;
}

}  // namespace ptz
