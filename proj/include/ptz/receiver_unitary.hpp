#pragma once

#include "ptz/types.hpp"

#include <span>
#include <vector>

namespace ptz {

/// Angles of the block-diagonal extended-receiver unitary
/// U = diag(1, U^(1), ..., U^(K_active)).
///
/// Block k has F^(k) = D(D-1) angles, D = C(N_ER, k): the first D(D-1)/2 drive
/// the x-type generators, the rest the y-type generators, each list in
/// ascending generator index (see generator_index). Flattened order is block
/// ascending, x-angles then y-angles. Blocks above K_active act as identity.
class ReceiverUnitaryParams {
 public:
  ReceiverUnitaryParams() = default;
  ReceiverUnitaryParams(int n_er, int active_blocks);

  static ReceiverUnitaryParams zeros(int n_er, int active_blocks) { return {n_er, active_blocks}; }
  static ReceiverUnitaryParams from_flat(int n_er, int active_blocks, std::span<const double> flat);

  int n_er() const { return n_er_; }
  int active_blocks() const { return static_cast<int>(blocks_.size()); }
  /// Block dimension C(N_ER, k).
  int block_dim(int k) const;

  const RealVector& angles(int k) const;
  RealVector& angles(int k);

  std::size_t total_size() const;
  RealVector flat() const;

 private:
  int n_er_ = 0;
  std::vector<RealVector> blocks_;  // blocks_[k-1]
};

/// 1-based index n of upper-triangular slot (row, col), row < col, in a
/// dim x dim block: n = sum_{m=1}^{row-1} (dim - m) + col - row.
int generator_index(int row, int col, int block_dim);

/// U^(k) as the ordered product of two-level rotations exp(i phi G): all
/// x-generators by ascending n, then all y-generators by ascending n.
/// G_x has 1 at (row,col) and (col,row); G_y has -i at (row,col), +i at (col,row).
/// k = 0 yields the 1x1 identity; k above the active range yields identity.
Matrix build_unitary_block(const ReceiverUnitaryParams& params, int k);

/// sum_{n=1}^{K} D_n (D_n - 1), D_n = C(N_ER, n).
int effective_parameter_count(int n_er, int max_k);

}  // namespace ptz
