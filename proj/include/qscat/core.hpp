#pragma once

// Finite-dimensional operator algebra on the joint internal space Y = A (x) B.
// Units: hbar = k_B = 1.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qscat/error.hpp"

namespace qscat {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kHbar = 1.0;
inline constexpr double kBoltzmann = 1.0;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

/// Tolerances used to validate operator inputs.
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kDensityTol = 1e-10;
inline constexpr double kEntropyCutoff = 1e-14;

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// max |M - M^dagger|
inline double hermiticity_defect(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("hermiticity_defect: matrix is not square");
  }
  return max_abs(m - m.adjoint());
}

/// (M + M^dagger) / 2, evaluated into a fresh matrix so that `m` may be the
/// assignment target.
inline Matrix hermitian_part(const Matrix& m) {
  Matrix out = 0.5 * (m + m.adjoint());
  return out;
}

/// max |U^dagger U - I|
inline double unitarity_defect(const Matrix& u) {
  return max_abs(u.adjoint() * u - Matrix::Identity(u.rows(), u.cols()));
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionError(std::string(what) + ": expected a non-empty square matrix");
  }
}

inline void require_hermitian(const Matrix& m, double tol, const char* what) {
  require_square(m, what);
  if (hermiticity_defect(m) > tol) {
    throw InvalidArgument(std::string(what) + ": operator is not Hermitian");
  }
}

/// Eigendecomposition of a Hermitian matrix with a fixed phase convention:
/// eigenvalues ascending, the largest-magnitude component of every
/// eigenvector real and positive (first one on ties).
struct HermitianEigen {
  RealVector values;
  Matrix vectors;
};

inline HermitianEigen hermitian_eigen(const Matrix& h) {
  require_square(h, "hermitian_eigen");
  const Matrix sym = hermitian_part(h);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("hermitian_eigen: eigensolver did not converge");
  }
  HermitianEigen out{solver.eigenvalues(), solver.eigenvectors()};
  for (Eigen::Index c = 0; c < out.vectors.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index r = 0; r < out.vectors.rows(); ++r) {
      const double a = std::abs(out.vectors(r, c));
      if (a > best_abs + 1e-12) {
        best_abs = a;
        best = r;
      }
    }
    const cplx phase = out.vectors(best, c) / std::abs(out.vectors(best, c));
    out.vectors.col(c) *= std::conj(phase);
  }
  return out;
}

/// exp(-i * scale * H) for Hermitian H, computed spectrally so the result is
/// unitary to rounding for any scale.
inline Matrix unitary_from_generator(const Matrix& h, double scale) {
  require_hermitian(h, 1e-10, "unitary_from_generator");
  const HermitianEigen eig = hermitian_eigen(h);
  Eigen::VectorXcd phases(eig.values.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    phases(i) = std::exp(-kI * scale * eig.values(i));
  }
  return eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
}

/// Joint internal system Y with H_Y = H_A (x) 1 + 1 (x) H_B. Matrices are
/// stored in the product ("site") basis; the eigenbasis is available through
/// to_eigenbasis / from_eigenbasis.
class InternalSystem {
 public:
  InternalSystem(Matrix h_a, Matrix h_b) : h_a_(std::move(h_a)), h_b_(std::move(h_b)) {
    require_hermitian(h_a_, kHermitianTol, "InternalSystem H_A");
    require_hermitian(h_b_, kHermitianTol, "InternalSystem H_B");
    h_a_ = hermitian_part(h_a_);
    h_b_ = hermitian_part(h_b_);
    h_y_ = kron(h_a_, Matrix::Identity(h_b_.rows(), h_b_.rows())) +
           kron(Matrix::Identity(h_a_.rows(), h_a_.rows()), h_b_);
    const HermitianEigen eig = hermitian_eigen(h_y_);
    energies_ = eig.values;
    basis_ = eig.vectors;
  }

  std::size_t dim_a() const { return static_cast<std::size_t>(h_a_.rows()); }
  std::size_t dim_b() const { return static_cast<std::size_t>(h_b_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(h_y_.rows()); }

  const Matrix& h_a() const { return h_a_; }
  const Matrix& h_b() const { return h_b_; }
  const Matrix& h_y() const { return h_y_; }

  /// Eigenvalues e_j, ascending.
  const RealVector& energies() const { return energies_; }
  double energy(std::size_t j) const { return energies_(static_cast<Eigen::Index>(j)); }
  /// Columns are the eigenvectors |j> expressed in the product basis.
  const Matrix& eigenvectors() const { return basis_; }

  /// Delta_{j'j} = e_{j'} - e_j
  double gap(std::size_t jp, std::size_t j) const { return energy(jp) - energy(j); }
  /// Delta_Y = e_N - e_1
  double span() const { return energies_(energies_.size() - 1) - energies_(0); }

  Matrix to_eigenbasis(const Matrix& m) const { return basis_.adjoint() * m * basis_; }
  Matrix from_eigenbasis(const Matrix& m) const { return basis_ * m * basis_.adjoint(); }

 private:
  Matrix h_a_;
  Matrix h_b_;
  Matrix h_y_;
  RealVector energies_;
  Matrix basis_;
};

/// Density matrix validated on construction: Hermitian, unit trace and
/// positive semidefinite, each to `tol`.
class DensityMatrix {
 public:
  explicit DensityMatrix(Matrix m, double tol = kDensityTol) : m_(std::move(m)), tol_(tol) {
    require_square(m_, "DensityMatrix");
    if (hermiticity_defect(m_) > tol) {
      throw InvalidArgument("DensityMatrix: not Hermitian");
    }
    if (std::abs(m_.trace() - cplx(1.0)) > tol) {
      throw InvalidArgument("DensityMatrix: trace differs from 1");
    }
    const Matrix sym = hermitian_part(m_);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -tol) {
      throw InvalidArgument("DensityMatrix: negative eigenvalue");
    }
  }

  static DensityMatrix maximally_mixed(std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    return DensityMatrix(Matrix::Identity(n, n) / static_cast<double>(dim));
  }

  /// |psi><psi| for a (not necessarily normalised) state vector.
  static DensityMatrix pure(const Eigen::VectorXcd& psi) {
    const double norm = psi.norm();
    if (norm == 0.0) {
      throw InvalidArgument("DensityMatrix::pure: zero vector");
    }
    const Eigen::VectorXcd v = psi / norm;
    return DensityMatrix(v * v.adjoint());
  }

  const Matrix& matrix() const { return m_; }
  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  cplx operator()(std::size_t r, std::size_t c) const {
    return m_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  double trace() const { return m_.trace().real(); }
  /// Tolerance the matrix was validated against.
  double tolerance() const { return tol_; }

 private:
  Matrix m_;
  double tol_;
};

/// Interaction operator nu on Y, in the product basis.
class CouplingOperator {
 public:
  explicit CouplingOperator(Matrix nu) : nu_(std::move(nu)) {
    require_hermitian(nu_, kHermitianTol, "CouplingOperator");
    nu_ = hermitian_part(nu_);
  }
  const Matrix& matrix() const { return nu_; }
  std::size_t dim() const { return static_cast<std::size_t>(nu_.rows()); }

 private:
  Matrix nu_;
};

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

/// rho_A (x) rho_B
inline DensityMatrix tensor_factorize(const DensityMatrix& rho_a, const DensityMatrix& rho_b) {
  return DensityMatrix(kron(rho_a.matrix(), rho_b.matrix()));
}

/// As above, additionally checking the factor dimensions against `system`.
inline DensityMatrix tensor_factorize(const InternalSystem& system, const DensityMatrix& rho_a,
                                      const DensityMatrix& rho_b) {
  require_same_dim(rho_a.dim(), system.dim_a(), "tensor_factorize (A)");
  require_same_dim(rho_b.dim(), system.dim_b(), "tensor_factorize (B)");
  return tensor_factorize(rho_a, rho_b);
}

/// Eigenvalues of the Hermitian part, with values in [-tol, 0) clamped to 0.
inline RealVector density_spectrum(const Matrix& rho, double tol = kDensityTol) {
  require_square(rho, "density_spectrum");
  const Matrix sym = hermitian_part(rho);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  RealVector ev = solver.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol) {
      throw NumericalError("von_neumann_entropy: state is not positive semidefinite");
    }
    ev(i) = std::max(ev(i), 0.0);
  }
  return ev;
}

/// S(rho) = -k_B Tr[rho ln rho] in nats; eigenvalues below 1e-14 contribute 0.
inline double von_neumann_entropy(const Matrix& rho, double tol = kDensityTol) {
  const RealVector ev = density_spectrum(rho, tol);
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > kEntropyCutoff) {
      s -= ev(i) * std::log(ev(i));
    }
  }
  return kBoltzmann * std::max(s, 0.0);
}

inline double von_neumann_entropy(const DensityMatrix& rho) {
  return von_neumann_entropy(rho.matrix(), std::max(rho.tolerance(), kDensityTol));
}

}  // namespace qscat
