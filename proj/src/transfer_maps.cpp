#include "ptz/transfer_maps.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ptz {

struct EvolvedTransfer::Shared {
  TransferLayout layout;
  int max_k = 0;
  int receiver_k = 0;
  std::vector<std::vector<std::size_t>> sender_rows;
  std::vector<TailGrouping> er_groups;
  std::vector<TailGrouping> receiver_groups;
};

void TransferLayout::validate() const {
  if (n_sites < 1) throw DomainError("layout: chain must have at least one site");
  if (n_sender < 1 || n_sender > n_sites) throw DomainError("layout: sender size outside [1, N]");
  if (n_receiver < 1 || n_receiver > n_sites) throw DomainError("layout: receiver size outside [1, N]");
  if (n_extended < n_receiver || n_extended > n_sites) {
    throw DomainError("layout: extended receiver must satisfy N_R <= N_ER <= N");
  }
}

double OneExcitationMap::spectral_norm() const {
  if (matrix.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(matrix);
  return svd.singularValues()(0);
}

OneExcitationMap extract_one_excitation_map(const Matrix& w1, const TransferLayout& layout, double t) {
  layout.validate();
  if (w1.rows() != layout.n_sites || w1.cols() != layout.n_sites) {
    throw DomainError("extract_one_excitation_map: W1 must be N x N");
  }
  const int first = layout.n_sites - layout.n_receiver;
  return {w1.block(first, 0, layout.n_receiver, layout.n_sender), t};
}

Matrix OneExcitationKernel::map(const Matrix& u1) const {
  if (u1.rows() != v_tilde.rows() || u1.cols() != v_tilde.rows()) {
    throw DomainError("one-excitation kernel: U^(1) must be N_ER x N_ER");
  }
  return u1.bottomRows(n_receiver) * v_tilde;
}

Matrix OneExcitationKernel::map(const ReceiverUnitaryParams& params) const {
  if (params.n_er() != v_tilde.rows()) throw DomainError("one-excitation kernel: N_ER mismatch");
  if (params.active_blocks() < 1) return v_tilde.bottomRows(n_receiver);
  return map(build_unitary_block(params, 1));
}

int EvolvedTransfer::n_sender() const { return shared_->layout.n_sender; }
int EvolvedTransfer::n_receiver() const { return shared_->layout.n_receiver; }

ZeroCoherenceState EvolvedTransfer::receiver_state(const ZeroCoherenceState& sender) const {
  const Shared& sh = *shared_;
  if (sender.subsystem_size() != sh.layout.n_sender) throw DomainError("receiver_state: sender size mismatch");
  if (sender.max_excitation() > sh.max_k) {
    throw DomainError("receiver_state: sender block " + std::to_string(sender.max_excitation()) +
                      " exceeds pipeline range " + std::to_string(sh.max_k));
  }
  ZeroCoherenceState r(sh.layout.n_receiver, sh.receiver_k);
  Matrix left;
  Matrix right;
  for (int k = 0; k <= sender.max_excitation(); ++k) {
    const Matrix& c = columns_[k];
    const Matrix cs = c * sender.block(k);
    for (const auto& g : sh.receiver_groups[k].groups) {
      const auto size = static_cast<Eigen::Index>(g.rows.size());
      left.resize(size, cs.cols());
      right.resize(size, c.cols());
      for (Eigen::Index a = 0; a < size; ++a) {
        left.row(a) = cs.row(static_cast<Eigen::Index>(g.rows[a]));
        right.row(a) = c.row(static_cast<Eigen::Index>(g.rows[a]));
      }
      const Matrix contrib = left * right.adjoint();
      Matrix& target = r.block(g.tail_excitations);
      for (Eigen::Index a = 0; a < size; ++a)
        for (Eigen::Index b = 0; b < size; ++b)
          target(static_cast<Eigen::Index>(g.local[a]), static_cast<Eigen::Index>(g.local[b])) += contrib(a, b);
    }
  }
  return r;
}

TransferPipeline::TransferPipeline(std::shared_ptr<const SpectralCache> cache, const TransferLayout& layout, int max_k)
    : cache_(std::move(cache)) {
  if (!cache_) throw DomainError("transfer pipeline: null spectral cache");
  layout.validate();
  if (layout.n_sites != cache_->chain().n_sites) throw DomainError("transfer pipeline: layout N differs from chain");
  if (max_k < 0 || max_k > layout.n_sender) throw DomainError("transfer pipeline: K outside [0, N_S]");
  if (!cache_->has_sector(max_k)) throw DomainError("transfer pipeline: spectral cache lacks sector " + std::to_string(max_k));

  auto sh = std::make_shared<EvolvedTransfer::Shared>();
  sh->layout = layout;
  sh->max_k = max_k;
  sh->receiver_k = std::min(max_k, layout.n_receiver);
  for (int k = 0; k <= max_k; ++k) {
    const ExcitationBasis& basis = cache_->basis(k);
    sh->sender_rows.push_back(embed_subsystem(basis, SiteRange{1, layout.n_sender}).row_map);
    sh->er_groups.push_back(group_by_tail(basis, layout.n_extended));
    sh->receiver_groups.push_back(group_by_tail(basis, layout.n_receiver));
  }
  shared_ = std::move(sh);
}

const TransferLayout& TransferPipeline::layout() const { return shared_->layout; }
int TransferPipeline::max_excitation() const { return shared_->max_k; }

EvolvedTransfer TransferPipeline::at(double t, const ReceiverUnitaryParams& params) const {
  if (params.n_er() != shared_->layout.n_extended) throw DomainError("transfer pipeline: unitary N_ER mismatch");
  EvolvedTransfer out;
  out.shared_ = shared_;
  out.t_ = t;
  for (int k = 0; k <= shared_->max_k; ++k) {
    Matrix cols = propagator_columns(*cache_, k, t, shared_->sender_rows[k]);
    if (k > 0) apply_embedded_unitary(shared_->er_groups[k], params, cols);
    out.columns_.push_back(std::move(cols));
  }
  return out;
}

OneExcitationKernel TransferPipeline::one_excitation_kernel(double t) const {
  const TransferLayout& l = shared_->layout;
  if (!cache_->has_sector(1)) throw DomainError("one_excitation_kernel: sector 1 not cached");
  std::vector<std::size_t> cols(static_cast<std::size_t>(l.n_sender));
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  const Matrix v = propagator_columns(*cache_, 1, t, cols);
  return {v.bottomRows(l.n_extended), l.n_receiver, t};
}

OneExcitationMap TransferPipeline::one_excitation_map(double t, const ReceiverUnitaryParams& params) const {
  return {one_excitation_kernel(t).map(params), t};
}

TransferTensor::TransferTensor(int sector, int receiver_dim, int sender_dim)
    : sector_(sector), dr_(receiver_dim), ds_(sender_dim) {
  if (receiver_dim < 0 || sender_dim < 0) throw DomainError("transfer tensor: negative dimension");
  data_.assign(static_cast<std::size_t>(dr_) * dr_ * ds_ * ds_, Complex{0.0, 0.0});
}

std::size_t TransferTensor::index(int i, int j, int n, int m) const {
  return ((static_cast<std::size_t>(i) * dr_ + j) * ds_ + n) * ds_ + m;
}

Matrix TransferTensor::apply(const Matrix& s) const {
  if (s.rows() != ds_ || s.cols() != ds_) throw DomainError("transfer tensor: sender block shape mismatch");
  Matrix r = Matrix::Zero(dr_, dr_);
  for (int i = 0; i < dr_; ++i)
    for (int j = 0; j < dr_; ++j)
      for (int n = 0; n < ds_; ++n)
        for (int m = 0; m < ds_; ++m) r(i, j) += (*this)(i, j, n, m) * s(n, m);
  return r;
}

double TransferTensor::hermitian_symmetry_defect() const {
  double worst = 0.0;
  for (int i = 0; i < dr_; ++i)
    for (int j = 0; j < dr_; ++j)
      for (int n = 0; n < ds_; ++n)
        for (int m = 0; m < ds_; ++m)
          worst = std::max(worst, std::abs((*this)(i, j, n, m) - std::conj((*this)(j, i, m, n))));
  return worst;
}

double TransferTensor::max_abs_diff(const TransferTensor& other) const {
  if (dr_ != other.dr_ || ds_ != other.ds_) throw DomainError("transfer tensor: shape mismatch");
  double worst = 0.0;
  for (std::size_t a = 0; a < data_.size(); ++a) worst = std::max(worst, std::abs(data_[a] - other.data_[a]));
  return worst;
}

TransferTensor transfer_tensor(const EvolvedTransfer& transfer, int k) {
  const int ns = transfer.n_sender();
  const int nr = transfer.n_receiver();
  if (k < 0 || k > transfer.max_excitation() || k > nr) throw DomainError("transfer_tensor: sector out of range");
  const auto ds = static_cast<int>(binomial(ns, k));
  const auto dr = static_cast<int>(binomial(nr, k));
  TransferTensor tensor(k, dr, ds);
  for (int n = 0; n < ds; ++n) {
    for (int m = 0; m < ds; ++m) {
      ZeroCoherenceState probe(ns, k);
      probe.block(k)(n, m) = 1.0;
      const Matrix r = transfer.receiver_state(probe).block(k);
      for (int i = 0; i < dr; ++i)
        for (int j = 0; j < dr; ++j) tensor(i, j, n, m) = r(i, j);
    }
  }
  return tensor;
}

TransferTensor transfer_tensor(const TransferPipeline& pipeline, int k, double t, const ReceiverUnitaryParams& params) {
  return transfer_tensor(pipeline.at(t, params), k);
}

TransferTensor transfer_tensor_from_map(const OneExcitationMap& map) {
  const Matrix& w = map.matrix;
  const auto dr = static_cast<int>(w.rows());
  const auto ds = static_cast<int>(w.cols());
  TransferTensor tensor(1, dr, ds);
  for (int i = 0; i < dr; ++i)
    for (int j = 0; j < dr; ++j)
      for (int n = 0; n < ds; ++n)
        for (int m = 0; m < ds; ++m) tensor(i, j, n, m) = w(i, n) * std::conj(w(j, m));
  return tensor;
}

ScaleFactors scale_factors(const OneExcitationMap& map) {
  const Matrix& w = map.matrix;
  const Eigen::Index n = std::min(w.rows(), w.cols());
  if (n == 0) throw DomainError("scale_factors: empty map");
  ScaleFactors out;
  out.lambda.resize(n, n);
  double lo = std::numeric_limits<double>::infinity();
  double lo_off = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out.lambda(i, j) = w(i, i) * std::conj(w(j, j));
      const double a = std::abs(out.lambda(i, j));
      lo = std::min(lo, a);
      if (i != j) lo_off = std::min(lo_off, a);
    }
  }
  out.lambda_opt = lo;
  out.lambda_opt_offdiag = n == 1 ? lo : lo_off;
  return out;
}

double offdiagonal_residual(const Matrix& w) {
  double sq = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (i != j) sq += std::norm(w(i, j));
  return std::sqrt(sq);
}

SizeBoundCheck check_size_bounds(int n_sender, int n_extended, TransferProtocol protocol) {
  if (n_sender < 1 || n_extended < 1) throw DomainError("check_size_bounds: sizes must be positive");
  SizeBoundCheck out;
  if (protocol == TransferProtocol::ptz_restricted) {
    out.minimum_extended = n_sender + 1;
    out.explanation = "restricted PTZ transfer needs N_ER >= N_S + 1 = " + std::to_string(out.minimum_extended);
  } else {
    out.minimum_extended = 2 * n_sender - 1;
    out.explanation = "arbitrary-parameter transfer needs N_ER >= 2 N_S - 1 = " + std::to_string(out.minimum_extended);
  }
  out.satisfied = n_extended >= out.minimum_extended;
  if (!out.satisfied) out.explanation += ", got N_ER = " + std::to_string(n_extended);
  return out;
}

}  // namespace ptz
