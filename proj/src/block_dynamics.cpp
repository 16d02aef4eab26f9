#include "ptz/block_dynamics.hpp"

#include <lapacke.h>

#include <cmath>
#include <map>
#include <string>

namespace ptz {

namespace {

void require_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("time must be finite and non-negative");
}

Vector phases(const RealVector& eigenvalues, double t) {
  Vector p(eigenvalues.size());
  for (Eigen::Index m = 0; m < eigenvalues.size(); ++m) p[m] = std::exp(-kI * (eigenvalues[m] * t));
  return p;
}

}  // namespace

RealVector symmetric_eigensolve(RealMatrix& a) {
  if (a.rows() != a.cols()) throw DomainError("symmetric_eigensolve: matrix not square");
  const auto n = static_cast<lapack_int>(a.rows());
  RealVector w(n);
  if (n == 0) return w;
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, a.data(), n, w.data());
  if (info != 0) throw std::runtime_error("dsyevd failed with info=" + std::to_string(info));
  return w;
}

SpectralCache::SpectralCache(const ChainSpec& chain, int max_k) : chain_(chain) {
  chain_.validate();
  if (max_k < 0 || max_k > chain_.n_sites) throw DomainError("spectral cache: sector range out of bounds");
  sectors_.reserve(max_k + 1);
  for (int k = 0; k <= max_k; ++k) {
    Sector s;
    s.basis = ExcitationBasis(chain_.n_sites, k);
    if (s.basis.size() > kMaxSectorDim) {
      throw CapacityError("spectral cache: sector " + std::to_string(k) + " has dimension " +
                          std::to_string(s.basis.size()) + ", above " + std::to_string(kMaxSectorDim));
    }
    s.eigenvectors = build_hamiltonian_block(chain_, s.basis);
    s.eigenvalues = symmetric_eigensolve(s.eigenvectors);
    sectors_.push_back(std::move(s));
  }
}

const SpectralCache::Sector& SpectralCache::sector(int k) const {
  if (!has_sector(k)) throw DomainError("spectral cache: sector " + std::to_string(k) + " not cached");
  return sectors_[k];
}

double SpectralCache::reconstruction_residual(int k) const {
  const Sector& s = sector(k);
  const RealMatrix h = build_hamiltonian_block(chain_, s.basis);
  const RealMatrix rebuilt = s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose();
  const double scale = h.norm();
  return scale == 0.0 ? rebuilt.norm() : (h - rebuilt).norm() / scale;
}

Matrix propagator_block(const SpectralCache& cache, int k, double t) {
  require_time(t);
  const RealMatrix& q = cache.eigenvectors(k);
  const Vector p = phases(cache.eigenvalues(k), t);
  return q.cast<Complex>() * p.asDiagonal() * q.transpose().cast<Complex>();
}

Matrix propagator_columns(const SpectralCache& cache, int k, double t, std::span<const std::size_t> cols) {
  require_time(t);
  const RealMatrix& q = cache.eigenvectors(k);
  const Vector p = phases(cache.eigenvalues(k), t);
  Matrix right(q.cols(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c] >= static_cast<std::size_t>(q.rows())) throw DomainError("propagator_columns: column out of range");
    right.col(static_cast<Eigen::Index>(c)) = p.cwiseProduct(q.row(static_cast<Eigen::Index>(cols[c])).transpose().cast<Complex>());
  }
  return q.cast<Complex>() * right;
}

Complex propagator_element(const SpectralCache& cache, int k, double t, std::size_t row, std::size_t col) {
  require_time(t);
  const RealMatrix& q = cache.eigenvectors(k);
  const RealVector& lambda = cache.eigenvalues(k);
  const auto r = static_cast<Eigen::Index>(row);
  const auto c = static_cast<Eigen::Index>(col);
  if (r >= q.rows() || c >= q.rows()) throw DomainError("propagator_element: index out of range");
  Complex acc{0.0, 0.0};
  for (Eigen::Index m = 0; m < q.cols(); ++m) acc += q(r, m) * q(c, m) * std::exp(-kI * (lambda[m] * t));
  return acc;
}

TailGrouping group_by_tail(const ExcitationBasis& chain_basis, int n_tail) {
  const int n = chain_basis.n_sites();
  if (n_tail < 1 || n_tail > n) throw DomainError("group_by_tail: tail size outside [1, N]");
  const int boundary = n - n_tail;
  const int k = chain_basis.excitations();

  std::vector<ExcitationBasis> tail_bases;
  for (int j = 0; j <= std::min(k, n_tail); ++j) tail_bases.emplace_back(n_tail, j);

  TailGrouping out;
  out.n_tail = n_tail;
  std::map<SiteSet, std::size_t> group_of_head;
  SiteSet head;
  SiteSet tail;
  for (std::size_t row = 0; row < chain_basis.size(); ++row) {
    head.clear();
    tail.clear();
    for (int s : chain_basis.state(row)) {
      if (s <= boundary) head.push_back(s);
      else tail.push_back(s - boundary);
    }
    auto [it, inserted] = group_of_head.try_emplace(head, out.groups.size());
    if (inserted) {
      out.groups.emplace_back();
      out.groups.back().tail_excitations = static_cast<int>(tail.size());
    }
    auto& g = out.groups[it->second];
    g.rows.push_back(row);
    g.local.push_back(tail_bases[tail.size()].index_of(tail));
  }
  return out;
}

void apply_embedded_unitary(const TailGrouping& er_groups, const ReceiverUnitaryParams& params, Matrix& columns) {
  if (er_groups.n_tail != params.n_er()) throw DomainError("apply_embedded_unitary: N_ER mismatch");
  std::map<int, Matrix> blocks;
  for (int j = 1; j <= params.active_blocks(); ++j) blocks.emplace(j, build_unitary_block(params, j));

  Matrix gathered;
  for (const auto& g : er_groups.groups) {
    auto it = blocks.find(g.tail_excitations);
    if (it == blocks.end()) continue;  // U^(0) and inactive blocks are identity
    const Matrix& u = it->second;
    const auto size = static_cast<Eigen::Index>(g.rows.size());
    gathered.resize(size, columns.cols());
    for (Eigen::Index a = 0; a < size; ++a) {
      gathered.row(static_cast<Eigen::Index>(g.local[a])) = columns.row(static_cast<Eigen::Index>(g.rows[a]));
    }
    const Matrix rotated = u * gathered;
    for (Eigen::Index a = 0; a < size; ++a) {
      columns.row(static_cast<Eigen::Index>(g.rows[a])) = rotated.row(static_cast<Eigen::Index>(g.local[a]));
    }
  }
}

Matrix embedded_unitary(const ExcitationBasis& chain_basis, const ReceiverUnitaryParams& params) {
  const auto d = static_cast<Eigen::Index>(chain_basis.size());
  Matrix e = Matrix::Identity(d, d);
  apply_embedded_unitary(group_by_tail(chain_basis, params.n_er()), params, e);
  return e;
}

Matrix combined_block(const SpectralCache& cache, const ReceiverUnitaryParams& params, int k, double t) {
  if (!cache.has_sector(k)) throw DomainError("combined_block: sector " + std::to_string(k) + " not built");
  Matrix w = propagator_block(cache, k, t);
  if (k == 0) return w;
  apply_embedded_unitary(group_by_tail(cache.basis(k), params.n_er()), params, w);
  return w;
}

Complex two_excitation_transfer_amplitude(const SpectralCache& cache, double t) {
  const int n = cache.chain().n_sites;
  if (n < 4) throw DomainError("two_excitation_transfer_amplitude: needs N >= 4");
  const ExcitationBasis& b = cache.basis(2);
  const SiteSet sender{1, 2};
  const SiteSet receiver{n - 1, n};
  return propagator_element(cache, 2, t, b.index_of(receiver), b.index_of(sender));
}

}  // namespace ptz
