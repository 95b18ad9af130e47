#pragma once

// Two spin-1/2 worked example. Storage basis order: (uu, ud, du, dd), where
// the first label is spin A and u is the +1 eigenstate of sigma^z.
// H_A = dA sigma^z, H_B = dB sigma^z, nu = Jx sx(x)sx + Jy sy(x)sy.
// nu and H_Y split into the sectors {uu, dd} and {ud, du}.

#include <array>
#include <cmath>
#include <optional>

#include "qscat/core.hpp"

namespace qscat {

namespace spin_index {
inline constexpr std::size_t up_up = 0;
inline constexpr std::size_t up_down = 1;
inline constexpr std::size_t down_up = 2;
inline constexpr std::size_t down_down = 3;
}  // namespace spin_index

/// Storage indices of the two invariant sectors, ordered (|+>, |->).
inline constexpr std::array<std::size_t, 2> kSector1{spin_index::up_up, spin_index::down_down};
inline constexpr std::array<std::size_t, 2> kSector2{spin_index::up_down, spin_index::down_up};

struct TwoSpinParams {
  double delta_a = 0.75;
  double delta_b = 0.5;
  double jx = 0.8;
  double jy = 0.2;
};

struct TwoSpinModel {
  InternalSystem system;
  CouplingOperator nu;
};

inline Matrix pauli_x() {
  Matrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}
inline Matrix pauli_y() {
  Matrix m(2, 2);
  m << 0.0, -kI, kI, 0.0;
  return m;
}
inline Matrix pauli_z() {
  Matrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

inline TwoSpinModel build_two_spin(const TwoSpinParams& params) {
  if (!std::isfinite(params.delta_a) || !std::isfinite(params.delta_b) ||
      !std::isfinite(params.jx) || !std::isfinite(params.jy)) {
    throw InvalidArgument("build_two_spin: parameters must be finite");
  }
  Matrix nu = params.jx * kron(pauli_x(), pauli_x()) + params.jy * kron(pauli_y(), pauli_y());
  return TwoSpinModel{InternalSystem(params.delta_a * pauli_z(), params.delta_b * pauli_z()),
                      CouplingOperator(std::move(nu))};
}

/// exp(-i lambda nu) in the storage basis, built from its two sector blocks
/// exp(-i lambda_1 sx) (+) exp(-i lambda_2 sx) with lambda_1 = lambda (Jx - Jy),
/// lambda_2 = lambda (Jx + Jy). Cross-sector entries are exactly zero.
inline Matrix analytic_unitary(double lambda, double jx, double jy) {
  const double l1 = lambda * (jx - jy);
  const double l2 = lambda * (jx + jy);
  Matrix u = Matrix::Zero(4, 4);
  using namespace spin_index;
  u(up_up, up_up) = std::cos(l1);
  u(down_down, down_down) = std::cos(l1);
  u(up_up, down_down) = -kI * std::sin(l1);
  u(down_down, up_up) = -kI * std::sin(l1);
  u(up_down, up_down) = std::cos(l2);
  u(down_up, down_up) = std::cos(l2);
  u(up_down, down_up) = -kI * std::sin(l2);
  u(down_up, up_down) = -kI * std::sin(l2);
  return u;
}

/// lambda at which each sector completes n Rabi cycles; nullopt marks a
/// frozen sector (Jx = Jy for sector 1, Jx = -Jy for sector 2).
struct RabiLambdas {
  std::optional<double> sector1;
  std::optional<double> sector2;
};

inline RabiLambdas rabi_cycle_lambdas(double jx, double jy, int n) {
  RabiLambdas out;
  const double n_pi = kPi * static_cast<double>(n);
  if (jx - jy != 0.0) {
    out.sector1 = n_pi / (jx - jy);
  }
  if (jx + jy != 0.0) {
    out.sector2 = n_pi / (jx + jy);
  }
  return out;
}

/// Pure qubit state with <u|rho|u> = pop_up and <u|rho|d> = sqrt(pop_up (1 - pop_up)) e^{i phase}.
inline DensityMatrix qubit_pure_state(double pop_up, double phase) {
  if (!(pop_up >= 0.0 && pop_up <= 1.0)) {
    throw InvalidArgument("qubit_pure_state: population must lie in [0, 1]");
  }
  const double c = std::sqrt(pop_up * (1.0 - pop_up));
  Matrix m(2, 2);
  m << pop_up, c * std::exp(kI * phase), c * std::exp(-kI * phase), 1.0 - pop_up;
  return DensityMatrix(m);
}

/// Initial product state used for the reference two-spin collisions.
inline DensityMatrix reference_initial_state(double pop_a = 0.1, double pop_b = 0.5,
                                             double phase = kPi / 4.0) {
  return tensor_factorize(qubit_pure_state(pop_a, phase), qubit_pure_state(pop_b, phase));
}

}  // namespace qscat
