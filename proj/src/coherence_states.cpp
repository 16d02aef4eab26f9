#include "ptz/coherence_states.hpp"

#include "ptz/block_dynamics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ptz {

ZeroCoherenceState::ZeroCoherenceState(int subsystem_size, int max_excitation) : n_(subsystem_size) {
  if (subsystem_size < 1) throw DomainError("coherence state: subsystem size must be positive");
  if (max_excitation < 0 || max_excitation > subsystem_size) {
    throw DomainError("coherence state: K=" + std::to_string(max_excitation) + " exceeds subsystem size " +
                      std::to_string(subsystem_size));
  }
  for (int k = 0; k <= max_excitation; ++k) {
    const auto d = static_cast<Eigen::Index>(binomial(subsystem_size, k));
    blocks_.push_back(Matrix::Zero(d, d));
  }
}

ZeroCoherenceState ZeroCoherenceState::vacuum(int subsystem_size, int max_excitation) {
  ZeroCoherenceState s(subsystem_size, max_excitation);
  s.blocks_[0](0, 0) = 1.0;
  return s;
}

ZeroCoherenceState ZeroCoherenceState::maximally_mixed(int subsystem_size) {
  ZeroCoherenceState s(subsystem_size, subsystem_size);
  const double p = std::ldexp(1.0, -subsystem_size);
  for (auto& b : s.blocks_) b.diagonal().setConstant(p);
  return s;
}

int ZeroCoherenceState::block_dim(int k) const { return static_cast<int>(block(k).rows()); }

const Matrix& ZeroCoherenceState::block(int k) const {
  if (k < 0 || k > max_excitation()) throw DomainError("coherence state: block " + std::to_string(k) + " absent");
  return blocks_[k];
}

Matrix& ZeroCoherenceState::block(int k) {
  if (k < 0 || k > max_excitation()) throw DomainError("coherence state: block " + std::to_string(k) + " absent");
  return blocks_[k];
}

Complex ZeroCoherenceState::trace() const {
  Complex t{0.0, 0.0};
  for (const auto& b : blocks_) t += b.trace();
  return t;
}

double ZeroCoherenceState::min_eigenvalue() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks_) {
    const Matrix herm = 0.5 * (b + b.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues().minCoeff());
  }
  return lo;
}

double ZeroCoherenceState::max_hermiticity_defect() const {
  double worst = 0.0;
  for (const auto& b : blocks_) worst = std::max(worst, hermiticity_defect(b));
  return worst;
}

bool ZeroCoherenceState::same_layout(const ZeroCoherenceState& other) const {
  return n_ == other.n_ && blocks_.size() == other.blocks_.size();
}

void ZeroCoherenceState::validate_density(double hermitian_tol, double trace_tol, double psd_tol) const {
  if (max_hermiticity_defect() > hermitian_tol) throw InfeasibleStateError("state blocks are not Hermitian");
  const Complex tr = trace();
  if (std::abs(tr - 1.0) > trace_tol) {
    throw InfeasibleStateError("state trace " + format_real(tr.real()) + " differs from 1");
  }
  const double lo = min_eigenvalue();
  if (lo < psd_tol) throw InfeasibleStateError("state has negative eigenvalue " + std::to_string(lo));
}

ZeroCoherenceState& ZeroCoherenceState::operator+=(const ZeroCoherenceState& other) {
  if (!same_layout(other)) throw DomainError("coherence state: layout mismatch in addition");
  for (std::size_t k = 0; k < blocks_.size(); ++k) blocks_[k] += other.blocks_[k];
  return *this;
}

ZeroCoherenceState& ZeroCoherenceState::operator*=(Complex scale) {
  for (auto& b : blocks_) b *= scale;
  return *this;
}

ZeroCoherenceState operator+(ZeroCoherenceState a, const ZeroCoherenceState& b) { return a += b; }

ZeroCoherenceState operator-(ZeroCoherenceState a, const ZeroCoherenceState& b) {
  if (!a.same_layout(b)) throw DomainError("coherence state: layout mismatch in subtraction");
  for (int k = 0; k <= a.max_excitation(); ++k) a.block(k) -= b.block(k);
  return a;
}

ZeroCoherenceState operator*(Complex scale, ZeroCoherenceState a) { return a *= scale; }

double frobenius_norm(const ZeroCoherenceState& s) {
  double sq = 0.0;
  for (const auto& b : s.blocks()) sq += b.squaredNorm();
  return std::sqrt(sq);
}

Matrix to_dense(const ZeroCoherenceState& s) {
  const int n = s.subsystem_size();
  if (n > 20) throw CapacityError("to_dense: subsystem too large");
  const Eigen::Index dim = Eigen::Index{1} << n;
  Matrix dense = Matrix::Zero(dim, dim);
  for (int k = 0; k <= s.max_excitation(); ++k) {
    const ExcitationBasis basis(n, k);
    std::vector<Eigen::Index> bits(basis.size());
    for (std::size_t a = 0; a < basis.size(); ++a) {
      Eigen::Index idx = 0;
      for (int site : basis.state(a)) idx |= Eigen::Index{1} << (n - site);
      bits[a] = idx;
    }
    const Matrix& b = s.block(k);
    for (std::size_t a = 0; a < basis.size(); ++a)
      for (std::size_t c = 0; c < basis.size(); ++c)
        dense(bits[a], bits[c]) = b(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c));
  }
  return dense;
}

AsymptoticPTZ AsymptoticPTZ::vacuum_concentrated(int subsystem_size, int max_excitation) {
  return {Variant::vacuum_concentrated, subsystem_size, max_excitation, BlockAddress{0, 0}};
}

AsymptoticPTZ AsymptoticPTZ::swapped_concentrated(int subsystem_size, int max_excitation, BlockAddress swap_target) {
  if (swap_target.block < 1 || swap_target.block > max_excitation) {
    throw DomainError("asymptotic PTZ: swap target block outside 1..K");
  }
  if (swap_target.ordinal < 0 ||
      static_cast<std::uint64_t>(swap_target.ordinal) >= binomial(subsystem_size, swap_target.block)) {
    throw DomainError("asymptotic PTZ: swap target ordinal out of range");
  }
  return {Variant::swapped_concentrated, subsystem_size, max_excitation, swap_target};
}

ZeroCoherenceState AsymptoticPTZ::state() const {
  ZeroCoherenceState s(subsystem_size, max_excitation);
  s.block(unit.block)(unit.ordinal, unit.ordinal) = 1.0;
  return s;
}

ChainState embed_initial_state(const ZeroCoherenceState& sender, const std::vector<ExcitationBasis>& chain_bases) {
  const int k_max = sender.max_excitation();
  if (static_cast<int>(chain_bases.size()) <= k_max) {
    throw DomainError("embed_initial_state: chain sectors do not cover sender block " + std::to_string(k_max));
  }
  const int n_s = sender.subsystem_size();
  ChainState out;
  out.reserve(chain_bases.size());
  for (std::size_t k = 0; k < chain_bases.size(); ++k) {
    const auto& basis = chain_bases[k];
    if (basis.excitations() != static_cast<int>(k)) throw DomainError("embed_initial_state: bases out of sector order");
    if (n_s > basis.n_sites()) throw DomainError("embed_initial_state: sender larger than chain");
    const auto d = static_cast<Eigen::Index>(basis.size());
    Matrix sigma = Matrix::Zero(d, d);
    if (static_cast<int>(k) <= k_max) {
      const auto emb = embed_subsystem(basis, SiteRange{1, n_s});
      const Matrix& s = sender.block(static_cast<int>(k));
      for (std::size_t a = 0; a < emb.row_map.size(); ++a)
        for (std::size_t b = 0; b < emb.row_map.size(); ++b)
          sigma(static_cast<Eigen::Index>(emb.row_map[a]), static_cast<Eigen::Index>(emb.row_map[b])) =
              s(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    out.push_back(std::move(sigma));
  }
  return out;
}

ZeroCoherenceState partial_trace_to_receiver(const ChainState& chain_state, const std::vector<ExcitationBasis>& chain_bases,
                                             int n_receiver) {
  if (chain_state.size() != chain_bases.size() || chain_state.empty()) {
    throw DomainError("partial_trace_to_receiver: sector count mismatch");
  }
  const int k_chain = static_cast<int>(chain_state.size()) - 1;
  ZeroCoherenceState r(n_receiver, std::min(k_chain, n_receiver));
  for (int i = 0; i <= k_chain; ++i) {
    const Matrix& sigma = chain_state[i];
    if (sigma.rows() != static_cast<Eigen::Index>(chain_bases[i].size()) || sigma.cols() != sigma.rows()) {
      throw DomainError("partial_trace_to_receiver: sector " + std::to_string(i) + " has wrong shape");
    }
    const TailGrouping groups = group_by_tail(chain_bases[i], n_receiver);
    for (const auto& g : groups.groups) {
      Matrix& target = r.block(g.tail_excitations);
      for (std::size_t a = 0; a < g.rows.size(); ++a)
        for (std::size_t b = 0; b < g.rows.size(); ++b)
          target(static_cast<Eigen::Index>(g.local[a]), static_cast<Eigen::Index>(g.local[b])) +=
              sigma(static_cast<Eigen::Index>(g.rows[a]), static_cast<Eigen::Index>(g.rows[b]));
    }
  }
  return r;
}

ZeroCoherenceState apply_exchange_unitary(const ZeroCoherenceState& state, BlockAddress target, double tol) {
  if (target.block < 1 || target.block > state.max_excitation()) {
    throw DomainError("apply_exchange_unitary: target block outside 1..K");
  }
  const Matrix& blk = state.block(target.block);
  if (target.ordinal < 0 || target.ordinal >= blk.rows()) {
    throw DomainError("apply_exchange_unitary: target ordinal out of range");
  }
  const Eigen::Index o = target.ordinal;
  for (Eigen::Index j = 0; j < blk.rows(); ++j) {
    if (j == o) continue;
    const double worst = std::max(std::abs(blk(o, j)), std::abs(blk(j, o)));
    if (worst > tol) {
      throw PreconditionViolation("apply_exchange_unitary: element (" + std::to_string(o) + ", " + std::to_string(j) +
                                  ") of block " + std::to_string(target.block) + " is " + format_real(worst) +
                                  "; the exchange would create coherences");
    }
  }
  ZeroCoherenceState out = state;
  std::swap(out.block(0)(0, 0), out.block(target.block)(o, o));
  return out;
}

double deviation(const ZeroCoherenceState& state, const AsymptoticPTZ& reference) {
  const ZeroCoherenceState ref = reference.state();
  if (!state.same_layout(ref)) throw DomainError("deviation: layout mismatch");
  return frobenius_norm(ref - state);
}

}  // namespace ptz
