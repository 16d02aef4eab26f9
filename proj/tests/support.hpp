#pragma once

#include "ptz/coherence_states.hpp"
#include "ptz/excitation_basis.hpp"
#include "ptz/receiver_unitary.hpp"
#include "ptz/types.hpp"

#include <random>
#include <vector>

namespace ptz::test {

/// Dense index of a basis state: site s sets bit N - s.
inline Eigen::Index dense_index(const SiteSet& sites, int n_sites) {
  Eigen::Index idx = 0;
  for (int s : sites) idx |= Eigen::Index{1} << (n_sites - s);
  return idx;
}

/// Rows/columns of a dense 2^N operator restricted to the k-excitation sector.
inline Matrix sector_of(const Matrix& dense, int n_sites, int k) {
  const ExcitationBasis b(n_sites, k);
  Matrix out(b.size(), b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      out(i, j) = dense(dense_index(b.state(i), n_sites), dense_index(b.state(j), n_sites));
    }
  }
  return out;
}

inline ReceiverUnitaryParams random_params(int n_er, int active, std::uint64_t seed, double scale = 3.14159) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  ReceiverUnitaryParams p(n_er, active);
  for (int k = 1; k <= active; ++k) {
    for (Eigen::Index i = 0; i < p.angles(k).size(); ++i) p.angles(k)(i) = u(rng);
  }
  return p;
}

inline Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = Complex(g(rng), g(rng));
  return m;
}

}  // namespace ptz::test
