#pragma once

#include "ptz/block_dynamics.hpp"
#include "ptz/coherence_states.hpp"
#include "ptz/receiver_unitary.hpp"
#include "ptz/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace ptz {

/// Communication-line geometry: sender = sites 1..n_sender, receiver = last
/// n_receiver sites, extended receiver = last n_extended sites.
struct TransferLayout {
  int n_sites = 0;
  int n_sender = 0;
  int n_receiver = 0;
  int n_extended = 0;

  void validate() const;
  bool operator==(const TransferLayout&) const = default;
};

/// N_R x N_S matrix with r^(1) = W s^(1) W^dagger for a sender holding at most
/// one excitation. Row i = receiver-local site, column j = sender-local site.
struct OneExcitationMap {
  Matrix matrix;
  double t = 0.0;

  Complex operator()(int i, int j) const { return matrix(i, j); }
  /// Largest singular value.
  double spectral_norm() const;
};

/// W_ij = W1[row of receiver site i][column of sender site j] from the full
/// N x N combined one-excitation block.
OneExcitationMap extract_one_excitation_map(const Matrix& w1, const TransferLayout& layout, double t = 0.0);

/// One-excitation transfer with the unitary left free: V^(1)(t) restricted to
/// extended-receiver rows and sender columns, so that W = U_R * v_tilde where
/// U_R holds the receiver rows of U^(1).
struct OneExcitationKernel {
  Matrix v_tilde;  ///< N_ER x N_S
  int n_receiver = 0;
  double t = 0.0;

  Matrix map(const Matrix& u1) const;
  Matrix map(const ReceiverUnitaryParams& params) const;
};

/// The linear sender -> receiver map at fixed (t, phi). Holds, per sector k,
/// the columns of W^(k) that the sender populates.
class EvolvedTransfer {
 public:
  ZeroCoherenceState receiver_state(const ZeroCoherenceState& sender) const;
  int max_excitation() const { return static_cast<int>(columns_.size()) - 1; }
  int n_sender() const;
  int n_receiver() const;
  double t() const { return t_; }

 private:
  friend class TransferPipeline;
  struct Shared;
  std::shared_ptr<const Shared> shared_;
  std::vector<Matrix> columns_;
  double t_ = 0.0;
};

/// Evolve + unitary + partial trace for a sender with up to max_k
/// excitations; sector data are precomputed once per pipeline.
class TransferPipeline {
 public:
  TransferPipeline(std::shared_ptr<const SpectralCache> cache, const TransferLayout& layout, int max_k);

  const TransferLayout& layout() const;
  int max_excitation() const;
  const SpectralCache& cache() const { return *cache_; }

  EvolvedTransfer at(double t, const ReceiverUnitaryParams& params) const;
  ZeroCoherenceState receiver_state(const ZeroCoherenceState& sender, double t, const ReceiverUnitaryParams& params) const {
    return at(t, params).receiver_state(sender);
  }

  OneExcitationKernel one_excitation_kernel(double t) const;
  OneExcitationMap one_excitation_map(double t, const ReceiverUnitaryParams& params) const;

 private:
  std::shared_ptr<const SpectralCache> cache_;
  std::shared_ptr<const EvolvedTransfer::Shared> shared_;
};

/// T^(k)_{ij;nm}: receiver pair (i, j) x sender pair (n, m), 0-based.
class TransferTensor {
 public:
  TransferTensor(int sector, int receiver_dim, int sender_dim);

  int sector() const { return sector_; }
  int receiver_dim() const { return dr_; }
  int sender_dim() const { return ds_; }

  Complex& operator()(int i, int j, int n, int m) { return data_[index(i, j, n, m)]; }
  Complex operator()(int i, int j, int n, int m) const { return data_[index(i, j, n, m)]; }

  /// r_ij = sum_nm T_{ij;nm} s_nm.
  Matrix apply(const Matrix& sender_block) const;
  /// max |T_{ij;nm} - conj(T_{ji;mn})|.
  double hermitian_symmetry_defect() const;
  double max_abs_diff(const TransferTensor& other) const;

 private:
  std::size_t index(int i, int j, int n, int m) const;
  int sector_ = 0;
  int dr_ = 0;
  int ds_ = 0;
  std::vector<Complex> data_;
};

/// Probes the pipeline with elementary sender blocks E_nm in sector k.
TransferTensor transfer_tensor(const EvolvedTransfer& transfer, int k);
TransferTensor transfer_tensor(const TransferPipeline& pipeline, int k, double t, const ReceiverUnitaryParams& params);
/// T^(1)_{ij;nm} = W_in conj(W_jm).
TransferTensor transfer_tensor_from_map(const OneExcitationMap& map);

struct ScaleFactors {
  Matrix lambda;                 ///< lambda_ij = W_ii conj(W_jj)
  double lambda_opt = 0.0;       ///< min over all (i, j) of |lambda_ij|
  double lambda_opt_offdiag = 0.0;  ///< min over i != j (equals lambda_opt for N_S = 1)
};

ScaleFactors scale_factors(const OneExcitationMap& map);

/// sqrt(sum_{i != j} |W_ij|^2).
double offdiagonal_residual(const Matrix& w);

enum class TransferProtocol { ptz_restricted, arbitrary_parameter };

struct SizeBoundCheck {
  bool satisfied = false;
  int minimum_extended = 0;
  std::string explanation;
};

/// Necessary extended-receiver sizes: N_ER >= N_S + 1 for the restricted PTZ
/// protocol (a receiver-only unitary cannot lower the rank), and
/// N_ER >= 2 N_S - 1 for diagonalizing W in arbitrary-parameter transfer.
SizeBoundCheck check_size_bounds(int n_sender, int n_extended, TransferProtocol protocol);

}  // namespace ptz
