#include "ptz/receiver_unitary.hpp"

#include "ptz/excitation_basis.hpp"

#include <cmath>
#include <string>

namespace ptz {

ReceiverUnitaryParams::ReceiverUnitaryParams(int n_er, int active_blocks) : n_er_(n_er) {
  if (n_er < 1) throw DomainError("receiver unitary: N_ER must be positive");
  if (active_blocks < 0 || active_blocks > n_er) {
    throw DomainError("receiver unitary: active blocks " + std::to_string(active_blocks) + " outside [0, " +
                      std::to_string(n_er) + "]");
  }
  blocks_.reserve(active_blocks);
  for (int k = 1; k <= active_blocks; ++k) {
    const auto d = static_cast<Eigen::Index>(binomial(n_er, k));
    blocks_.push_back(RealVector::Zero(d * (d - 1)));
  }
}

ReceiverUnitaryParams ReceiverUnitaryParams::from_flat(int n_er, int active_blocks, std::span<const double> flat) {
  ReceiverUnitaryParams p(n_er, active_blocks);
  if (flat.size() != p.total_size()) {
    throw DomainError("receiver unitary: expected " + std::to_string(p.total_size()) + " angles, got " +
                      std::to_string(flat.size()));
  }
  std::size_t offset = 0;
  for (auto& block : p.blocks_) {
    for (Eigen::Index i = 0; i < block.size(); ++i) block[i] = flat[offset++];
  }
  return p;
}

int ReceiverUnitaryParams::block_dim(int k) const { return static_cast<int>(binomial(n_er_, k)); }

const RealVector& ReceiverUnitaryParams::angles(int k) const {
  if (k < 1 || k > active_blocks()) throw DomainError("receiver unitary: block " + std::to_string(k) + " inactive");
  return blocks_[k - 1];
}

RealVector& ReceiverUnitaryParams::angles(int k) {
  if (k < 1 || k > active_blocks()) throw DomainError("receiver unitary: block " + std::to_string(k) + " inactive");
  return blocks_[k - 1];
}

std::size_t ReceiverUnitaryParams::total_size() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += static_cast<std::size_t>(b.size());
  return n;
}

RealVector ReceiverUnitaryParams::flat() const {
  RealVector out(static_cast<Eigen::Index>(total_size()));
  Eigen::Index offset = 0;
  for (const auto& b : blocks_) {
    out.segment(offset, b.size()) = b;
    offset += b.size();
  }
  return out;
}

int generator_index(int row, int col, int block_dim) {
  if (row < 1 || col > block_dim || row >= col) {
    throw DomainError("generator_index: need 1 <= row < col <= dim, got (" + std::to_string(row) + ", " +
                      std::to_string(col) + ", " + std::to_string(block_dim) + ")");
  }
  int n = 0;
  for (int m = 1; m <= row - 1; ++m) n += block_dim - m;
  return n + col - row;
}

namespace {

// u <- u * exp(i phi G) restricted to columns (r, c).
void right_multiply_x(Matrix& u, Eigen::Index r, Eigen::Index c, double phi) {
  const double cs = std::cos(phi);
  const Complex is = kI * std::sin(phi);
  for (Eigen::Index row = 0; row < u.rows(); ++row) {
    const Complex a = u(row, r);
    const Complex b = u(row, c);
    u(row, r) = a * cs + b * is;
    u(row, c) = a * is + b * cs;
  }
}

void right_multiply_y(Matrix& u, Eigen::Index r, Eigen::Index c, double phi) {
  // exp(i phi G_y) = [[cos, sin], [-sin, cos]] on (r, c).
  const double cs = std::cos(phi);
  const double sn = std::sin(phi);
  for (Eigen::Index row = 0; row < u.rows(); ++row) {
    const Complex a = u(row, r);
    const Complex b = u(row, c);
    u(row, r) = a * cs - b * sn;
    u(row, c) = a * sn + b * cs;
  }
}

}  // namespace

Matrix build_unitary_block(const ReceiverUnitaryParams& params, int k) {
  if (k < 0 || k > params.n_er()) throw DomainError("build_unitary_block: block " + std::to_string(k) + " out of range");
  const Eigen::Index d = params.block_dim(k);
  Matrix u = Matrix::Identity(d, d);
  if (k == 0 || k > params.active_blocks()) return u;
  const RealVector& phi = params.angles(k);
  // Ascending generator index is row-major order over the upper triangle.
  Eigen::Index n = 0;
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = r + 1; c < d; ++c) right_multiply_x(u, r, c, phi[n++]);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = r + 1; c < d; ++c) right_multiply_y(u, r, c, phi[n++]);
  return u;
}

int effective_parameter_count(int n_er, int max_k) {
  if (max_k < 0 || max_k > n_er) throw DomainError("effective_parameter_count: K outside [0, N_ER]");
  int total = 0;
  for (int k = 1; k <= max_k; ++k) {
    const auto d = static_cast<int>(binomial(n_er, k));
    total += d * (d - 1);
  }
  return total;
}

}  // namespace ptz
