#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptz {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

// Error taxonomy. DomainError covers malformed arguments (sizes, ranges,
// layouts); the remaining types signal computational outcomes that callers
// are expected to handle individually.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateTimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoMaximumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Short %g rendering for diagnostics (std::to_string loses small values).
inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

/// Largest |A - A^dagger| entry.
inline double hermiticity_defect(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

/// Largest |B B^dagger - I| entry.
inline double unitarity_defect(const Matrix& b) {
  if (b.size() == 0) return 0.0;
  return (b * b.adjoint() - Matrix::Identity(b.rows(), b.cols())).cwiseAbs().maxCoeff();
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DomainError("max_abs_diff: shape mismatch");
  }
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace ptz
