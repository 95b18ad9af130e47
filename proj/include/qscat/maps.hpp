#pragma once

// Dynamical maps on the internal state of Y:
//   * the exact scattering map, built as a rank-4 tensor from s(E),
//   * the random-unitary reduction and the single-unitary collision,
//   * the time-dependent interaction model and its Magnus truncations.
//
// Density matrices passed in and out are in the product basis. The tensor
// itself lives in the H_Y eigenbasis, as does s(E).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qscat/core.hpp"
#include "qscat/kinetics.hpp"
#include "qscat/ode.hpp"
#include "qscat/parallel.hpp"
#include "qscat/potential.hpp"
#include "qscat/quadrature.hpp"
#include "qscat/smatrix.hpp"

namespace qscat {

/// Largest trace defect apply_map accepts before declaring the quadrature bad.
inline constexpr double kMaxTraceDefect = 1e-4;
/// Unitarity defect of U_I above which the time-dependent model fails.
inline constexpr double kMaxPropagatorDefect = 1e-6;

enum class SMatrixMode { grid, exact };

inline std::string to_string(SMatrixMode m) { return m == SMatrixMode::grid ? "grid" : "exact"; }

struct QuadratureSpec {
  std::size_t nodes = 128;
  double n_sigma = 8.0;
  double tol = 1e-8;
  SMatrixMode mode = SMatrixMode::grid;
  std::size_t max_panels = 64;
  std::size_t grid_min_points = 64;
  double grid_phase_step = 0.1;
  unsigned threads = 1;
};

/// Rank-4 array S^{jk}_{j'k'} with rho'_{j'k'} = sum_{jk} S^{jk}_{j'k'} rho_{jk}
/// (eigenbasis indices).
class MapTensor {
 public:
  MapTensor() = default;
  explicit MapTensor(std::size_t n) : n_(n), data_(n * n * n * n, cplx(0.0)) {}

  std::size_t dim() const { return n_; }

  cplx& operator()(std::size_t jp, std::size_t kp, std::size_t j, std::size_t k) {
    return data_[index(jp, kp, j, k)];
  }
  cplx operator()(std::size_t jp, std::size_t kp, std::size_t j, std::size_t k) const {
    return data_[index(jp, kp, j, k)];
  }

  static MapTensor identity(std::size_t n) {
    MapTensor t(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        t(j, k, j, k) = 1.0;
      }
    }
    return t;
  }

  /// Tensor of rho -> U rho U^dagger for a unitary U given in the eigenbasis.
  static MapTensor from_unitary(const Matrix& u) {
    const auto n = static_cast<std::size_t>(u.rows());
    MapTensor t(n);
    for (std::size_t jp = 0; jp < n; ++jp) {
      for (std::size_t kp = 0; kp < n; ++kp) {
        for (std::size_t j = 0; j < n; ++j) {
          for (std::size_t k = 0; k < n; ++k) {
            t(jp, kp, j, k) = u(static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(j)) *
                              std::conj(u(static_cast<Eigen::Index>(kp), static_cast<Eigen::Index>(k)));
          }
        }
      }
    }
    return t;
  }

  /// Quadrature bookkeeping.
  struct Info {
    std::size_t max_panels_used = 0;
    std::size_t evaluations = 0;
    double max_change = 0.0;
    bool converged = true;
    std::size_t grid_points = 0;
    std::size_t exact_solves = 0;
    double max_smatrix_defect = 0.0;
    double p_lo = 0.0;
    double p_hi = 0.0;
  };
  Info info;

 private:
  std::size_t index(std::size_t jp, std::size_t kp, std::size_t j, std::size_t k) const {
    return ((jp * n_ + kp) * n_ + j) * n_ + k;
  }

  std::size_t n_ = 0;
  std::vector<cplx> data_;
};

/// Choi matrix C[(j, j'), (k, k')] = Phi(|j><k|)_{j'k'}, i.e. the map applied
/// to one half of the unnormalised maximally entangled state.
inline Matrix choi_matrix(const MapTensor& s) {
  const std::size_t n = s.dim();
  const auto nn = static_cast<Eigen::Index>(n * n);
  Matrix c(nn, nn);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t jp = 0; jp < n; ++jp) {
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t kp = 0; kp < n; ++kp) {
          c(static_cast<Eigen::Index>(j * n + jp), static_cast<Eigen::Index>(k * n + kp)) =
              s(jp, kp, j, k);
        }
      }
    }
  }
  return c;
}

struct CptpReport {
  double trace_defect = 0.0;        ///< max_{jk} |sum_j' S^{jk}_{j'j'} - delta_jk|
  double min_choi_eig = 0.0;        ///< smallest eigenvalue of the Hermitian part of C
  double hermiticity_defect = 0.0;  ///< max |S^{jk}_{j'k'} - conj(S^{kj}_{k'j'})|
  RealVector choi_eigenvalues;      ///< descending

  bool passes(double trace_tol = 1e-6, double eig_tol = 1e-6, double herm_tol = 1e-8) const {
    return trace_defect <= trace_tol && min_choi_eig >= -eig_tol && hermiticity_defect <= herm_tol;
  }
};

inline CptpReport cptp_check(const MapTensor& s) {
  const std::size_t n = s.dim();
  CptpReport rep;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      cplx tr = 0.0;
      for (std::size_t jp = 0; jp < n; ++jp) {
        tr += s(jp, jp, j, k);
      }
      rep.trace_defect = std::max(rep.trace_defect, std::abs(tr - (j == k ? 1.0 : 0.0)));
      for (std::size_t jp = 0; jp < n; ++jp) {
        for (std::size_t kp = 0; kp < n; ++kp) {
          rep.hermiticity_defect = std::max(
              rep.hermiticity_defect, std::abs(s(jp, kp, j, k) - std::conj(s(kp, jp, k, j))));
        }
      }
    }
  }
  const Matrix c = choi_matrix(s);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian_part(c), Eigen::EigenvaluesOnly);
  rep.choi_eigenvalues = solver.eigenvalues().reverse();
  rep.min_choi_eig = solver.eigenvalues()(0);
  return rep;
}

namespace detail {

// Source of s(E) for the tensor quadrature: either direct (memoised) solves or
// interpolation on a pre-solved grid.
class SMatrixSource {
 public:
  SMatrixSource(const SMatrixSolver& solver, SMatrixMode mode, double e_min, double e_max,
                const QuadratureSpec& quad)
      : solver_(solver), mode_(mode) {
    if (mode_ == SMatrixMode::grid) {
      const RealVector p = open_channel_momenta(solver.system(), e_min, solver.options().mass);
      const std::size_t points =
          recommended_grid_points(e_min, e_max, p.minCoeff(), solver.potential().a(),
                                  solver.options().mass, quad.grid_min_points, quad.grid_phase_step);
      grid_.emplace(solver, e_min, e_max, points, quad.threads);
    }
  }

  SMatrixAtE at(double energy) const {
    return grid_ ? grid_->interpolate(energy) : *solver_.at(energy);
  }

  std::size_t grid_points() const { return grid_ ? grid_->points() : 0; }
  double max_defect() const { return grid_ ? grid_->max_defect() : solver_.max_defect(); }

 private:
  const SMatrixSolver& solver_;
  SMatrixMode mode_;
  std::optional<SMatrixGrid> grid_;
};

struct TensorElement {
  std::size_t jp, kp, j, k;
  double d_left;   // Delta_{j'j}
  double d_right;  // Delta_{k'k}
};

}  // namespace detail

/// Exact scattering map tensor from the multichannel s-matrix:
///   S^{jk}_{j'k'} = sum_{a'} int_{p_inf} dp rho_X(p, pi(p)) sqrt(p / pi(p))
///                   s^{(a'+)}_{j'j}(E_p + e_j) conj(s^{(a'+)}_{k'k}(E_p - Delta_{j'j} + e_k'))
/// with pi(p)^2 = p^2 - 2m(Delta_{j'j} - Delta_{k'k}). The p-integral runs over
/// p0 +- n_sigma sigma_p with the lower end raised to p_inf where needed.
inline MapTensor scattering_map_tensor(const SMatrixSolver& solver, const KineticState& state,
                                       const QuadratureSpec& quad = {}) {
  const InternalSystem& system = solver.system();
  const std::size_t n = system.dim();
  const double m = state.mass();
  if (quad.nodes == 0 || !(quad.n_sigma > 0.0) || !(quad.tol > 0.0)) {
    throw InvalidArgument("scattering_map_tensor: invalid quadrature settings");
  }
  const double p_lo = state.p0() - quad.n_sigma * state.sigma_p();
  const double p_hi = state.p0() + quad.n_sigma * state.sigma_p();
  if (!(p_lo > 0.0)) {
    throw NumericalError("scattering_map_tensor: quadrature window reaches p <= 0");
  }

  // Group elements by lower integration limit so each group is one
  // vector-valued quadrature.
  std::map<double, std::vector<detail::TensorElement>> groups;
  double e_min = std::numeric_limits<double>::infinity();
  double e_max = -std::numeric_limits<double>::infinity();
  for (std::size_t jp = 0; jp < n; ++jp) {
    for (std::size_t kp = 0; kp < n; ++kp) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
          const double dl = system.gap(jp, j);
          const double dr = system.gap(kp, k);
          const double p_inf = std::sqrt(2.0 * m * std::max({0.0, dl, dl - dr}));
          const double start = std::max(p_lo, p_inf);
          if (!(start < p_hi)) {
            continue;
          }
          groups[start].push_back({jp, kp, j, k, dl, dr});
          for (double p : {start, p_hi}) {
            const double ep = p * p / (2.0 * m);
            for (double e : {ep + system.energy(j), ep - dl + system.energy(kp)}) {
              e_min = std::min(e_min, e);
              e_max = std::max(e_max, e);
            }
          }
        }
      }
    }
  }

  MapTensor tensor(n);
  tensor.info.p_lo = p_lo;
  tensor.info.p_hi = p_hi;
  if (groups.empty()) {
    return tensor;
  }
  if (quad.mode == SMatrixMode::grid && !(e_max > e_min)) {
    e_max = e_min + 1.0;
  }
  const detail::SMatrixSource source(solver, quad.mode, e_min, e_max, quad);
  tensor.info.grid_points = source.grid_points();

  for (const auto& [start, elems] : groups) {
    const auto count = static_cast<Eigen::Index>(elems.size());
    auto integrand = [&](double p) {
      const double ep = p * p / (2.0 * m);
      // s(E) at the handful of distinct energies needed at this p.
      std::map<double, SMatrixAtE> cache;
      auto s_at = [&](double e) -> const SMatrixAtE& {
        auto it = cache.find(e);
        if (it == cache.end()) {
          it = cache.emplace(e, source.at(e)).first;
        }
        return it->second;
      };
      Eigen::VectorXcd out(count);
      for (Eigen::Index i = 0; i < count; ++i) {
        const detail::TensorElement& el = elems[static_cast<std::size_t>(i)];
        const double pi2 = p * p - 2.0 * m * (el.d_left - el.d_right);
        const double pi = std::sqrt(std::max(pi2, 0.0));
        if (!(pi > 0.0)) {
          out(i) = 0.0;
          continue;
        }
        const SMatrixAtE& sl = s_at(ep + system.energy(el.j));
        const SMatrixAtE& sr = s_at(ep - el.d_left + system.energy(el.kp));
        cplx acc = 0.0;
        for (int alpha : {+1, -1}) {
          acc += sl.left(alpha, el.jp, el.j) * std::conj(sr.left(alpha, el.kp, el.k));
        }
        out(i) = state.rho(p, pi) * std::sqrt(p / pi) * acc;
      }
      return out;
    };
    const QuadratureResult<Eigen::VectorXcd> res =
        integrate_adaptive(integrand, start, p_hi, quad.nodes, quad.tol, quad.max_panels,
                           Eigen::VectorXcd(Eigen::VectorXcd::Zero(count)), quad.threads);
    for (Eigen::Index i = 0; i < count; ++i) {
      const detail::TensorElement& el = elems[static_cast<std::size_t>(i)];
      tensor(el.jp, el.kp, el.j, el.k) = res.value(i);
    }
    tensor.info.max_panels_used = std::max(tensor.info.max_panels_used, res.panels);
    tensor.info.evaluations += res.evaluations;
    tensor.info.max_change = std::max(tensor.info.max_change, res.change);
    tensor.info.converged = tensor.info.converged && res.converged;
  }
  tensor.info.exact_solves = solver.solves();
  tensor.info.max_smatrix_defect = source.max_defect();
  if (!tensor.info.converged) {
    throw NumericalError("scattering_map_tensor: quadrature did not converge (change " +
                         std::to_string(tensor.info.max_change) + " after " +
                         std::to_string(tensor.info.max_panels_used) + " panels)");
  }
  return tensor;
}

/// Convenience overload owning a fresh solver.
inline MapTensor scattering_map_tensor(const InternalSystem& system, const CouplingOperator& nu,
                                       const SpatialPotential& potential,
                                       const KineticState& state, const QuadratureSpec& quad = {},
                                       double ode_tol = 1e-10) {
  require_same_dim(nu.dim(), system.dim(), "scattering_map_tensor");
  SolveOptions so;
  so.ode_tol = ode_tol;
  so.mass = state.mass();
  const SMatrixSolver solver(system, nu, potential, so);
  return scattering_map_tensor(solver, state, quad);
}

/// Output of apply_map: the state plus the diagnostics that were removed or
/// left in place.
struct MappedState {
  DensityMatrix rho;
  double trace_defect = 0.0;        ///< |Tr rho' - 1|, never renormalised away
  double hermiticity_defect = 0.0;  ///< before symmetric re-Hermitisation
};

/// rho' = Phi(rho). rho and rho' are in the product basis.
inline MappedState apply_map(const InternalSystem& system, const MapTensor& tensor,
                             const DensityMatrix& rho) {
  require_same_dim(tensor.dim(), rho.dim(), "apply_map");
  require_same_dim(system.dim(), rho.dim(), "apply_map");
  const std::size_t n = tensor.dim();
  const Matrix in = system.to_eigenbasis(rho.matrix());
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t jp = 0; jp < n; ++jp) {
    for (std::size_t kp = 0; kp < n; ++kp) {
      cplx acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
          acc += tensor(jp, kp, j, k) * in(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        }
      }
      out(static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(kp)) = acc;
    }
  }
  const double herm = hermiticity_defect(out);
  out = hermitian_part(out);
  const double trace_defect = std::abs(out.trace().real() - 1.0);
  if (trace_defect > kMaxTraceDefect) {
    throw NumericalError("apply_map: trace defect " + std::to_string(trace_defect) +
                         " exceeds " + std::to_string(kMaxTraceDefect));
  }
  Matrix prod = system.from_eigenbasis(out);
  prod = hermitian_part(prod);
  return MappedState{DensityMatrix(std::move(prod), kMaxTraceDefect), trace_defect, herm};
}

/// Deterministic random Hermitian matrix with i.i.d. Gaussian entries,
/// normalised to unit max-abs entry.
inline Matrix random_hermitian(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto dim = static_cast<Eigen::Index>(n);
  Matrix h(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      h(r, c) = cplx(gauss(rng), gauss(rng));
    }
  }
  h = hermitian_part(h);
  return h / max_abs(h);
}

/// U(tau_p) = exp(-i tau_p <V> nu / hbar), tau_p = m a / p (product basis).
inline Matrix collision_unitary(const CouplingOperator& nu, double mean_v, double p, double a,
                                double mass = 1.0) {
  if (!(p > 0.0)) {
    throw InvalidArgument("collision_unitary: p must be positive");
  }
  return unitary_from_generator(nu.matrix(), mass * a / p * mean_v / kHbar);
}

/// rho' = U rho U^dagger with U = exp(-i tau_p0 <V> nu / hbar).
inline DensityMatrix semiclassical_collision(const InternalSystem& system,
                                             const CouplingOperator& nu, double mean_v, double p0,
                                             double a, const DensityMatrix& rho,
                                             double mass = 1.0) {
  require_same_dim(nu.dim(), system.dim(), "semiclassical_collision");
  require_same_dim(rho.dim(), system.dim(), "semiclassical_collision");
  const Matrix u = collision_unitary(nu, mean_v, p0, a, mass);
  Matrix out = u * rho.matrix() * u.adjoint();
  out = hermitian_part(out);
  return DensityMatrix(std::move(out), std::max(rho.tolerance(), 1e-10));
}

/// rho' = int dp rho_X(p, p) U(tau_p) rho U(tau_p)^dagger over p0 +- n_sigma sigma_p.
inline DensityMatrix random_unitary_map(const InternalSystem& system, const CouplingOperator& nu,
                                        const SpatialPotential& potential,
                                        const KineticState& state, const DensityMatrix& rho,
                                        const QuadratureSpec& quad = {}) {
  require_same_dim(nu.dim(), system.dim(), "random_unitary_map");
  require_same_dim(rho.dim(), system.dim(), "random_unitary_map");
  const double p_lo = state.p0() - quad.n_sigma * state.sigma_p();
  const double p_hi = state.p0() + quad.n_sigma * state.sigma_p();
  if (!(p_lo > 0.0)) {
    throw NumericalError("random_unitary_map: quadrature window reaches p <= 0");
  }
  // Eigen-decompose nu once; each node only needs new phases.
  const HermitianEigen eig = hermitian_eigen(nu.matrix());
  const Matrix rho_nu = eig.vectors.adjoint() * rho.matrix() * eig.vectors;
  const double mean_v = potential.mean();
  const double a = potential.a();
  const double m = state.mass();
  const auto n = static_cast<Eigen::Index>(system.dim());
  auto integrand = [&](double p) {
    const double scale = m * a / p * mean_v / kHbar;
    Matrix out(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        out(r, c) = rho_nu(r, c) * std::exp(-kI * scale * (eig.values(r) - eig.values(c)));
      }
    }
    return Matrix(state.momentum_density(p) * out);
  };
  const QuadratureResult<Matrix> res = integrate_adaptive(
      integrand, p_lo, p_hi, quad.nodes, quad.tol, quad.max_panels, Matrix(Matrix::Zero(n, n)));
  if (!res.converged) {
    throw NumericalError("random_unitary_map: quadrature did not converge");
  }
  Matrix out = eig.vectors * res.value * eig.vectors.adjoint();
  out = hermitian_part(out);
  return DensityMatrix(std::move(out), 1e-6);
}

/// Interaction-picture propagator of the time-dependent model.
struct Propagator {
  Matrix u;                    ///< product basis
  double unitarity_defect = 0.0;
  std::size_t steps = 0;
};

namespace detail {

// dU/dt = -(i/hbar) V_I(t) U in the H_Y eigenbasis, with
// (V_I)_{jk}(t) = V~(t) nu_{jk} exp(i (e_j - e_k) t / hbar).
class InteractionPictureEquations {
 public:
  InteractionPictureEquations(const RealVector& energies, const Matrix& nu_eigen,
                              const TemporalPotential& pulse)
      : e_(energies), nu_(nu_eigen), pulse_(pulse) {
    const Eigen::Index n = e_.size();
    phase_.resize(n);
    vi_.resize(n, n);
  }

  void operator()(const OdeState& y, OdeState& dydt, double t) const {
    const Eigen::Index n = e_.size();
    const double v = pulse_(t);
    if (v == 0.0) {
      std::fill(dydt.begin(), dydt.end(), 0.0);
      return;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      phase_(j) = std::exp(cplx(0.0, e_(j) * t / kHbar));
    }
    vi_.noalias() = phase_.asDiagonal() * nu_ * phase_.conjugate().asDiagonal();
    Eigen::Map<const Matrix> u(reinterpret_cast<const cplx*>(y.data()), n, n);
    Eigen::Map<Matrix> du(reinterpret_cast<cplx*>(dydt.data()), n, n);
    du.noalias() = vi_ * u;
    du *= -kI * v / kHbar;
  }

 private:
  RealVector e_;
  Matrix nu_;
  const TemporalPotential& pulse_;
  mutable Eigen::VectorXcd phase_;
  mutable Matrix vi_;
};

}  // namespace detail

/// U_I(t1, t0) with U_I(t0, t0) = I, integrated piecewise between the kinks
/// of the pulse.
inline Propagator interaction_propagator(const InternalSystem& system, const CouplingOperator& nu,
                                         const TemporalPotential& pulse, double t0, double t1,
                                         double ode_tol = 1e-10) {
  require_same_dim(nu.dim(), system.dim(), "interaction_propagator");
  if (!(ode_tol > 0.0)) {
    throw InvalidArgument("interaction_propagator: ode_tol must be positive");
  }
  const auto n = static_cast<Eigen::Index>(system.dim());
  OdeState y(static_cast<std::size_t>(2 * n * n), 0.0);
  Eigen::Map<Matrix> u(reinterpret_cast<cplx*>(y.data()), n, n);
  u.setIdentity();

  const detail::InteractionPictureEquations rhs(system.energies(), system.to_eigenbasis(nu.matrix()),
                                                pulse);
  std::vector<double> stops{t0, t1};
  const double lo = std::min(t0, t1);
  const double hi = std::max(t0, t1);
  for (double k : pulse.kinks()) {
    if (k > lo && k < hi) {
      stops.push_back(k);
    }
  }
  for (double edge : {-0.5 * pulse.tau(), 0.5 * pulse.tau()}) {
    if (edge > lo && edge < hi) {
      stops.push_back(edge);
    }
  }
  if (t1 >= t0) {
    std::sort(stops.begin(), stops.end());
  } else {
    std::sort(stops.begin(), stops.end(), std::greater<>());
  }
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  OdeOptions opts;
  opts.tol = ode_tol;
  Propagator out;
  for (std::size_t i = 0; i + 1 < stops.size(); ++i) {
    const OdeStats st = integrate_ode(rhs, y, stops[i], stops[i + 1], opts);
    out.steps += st.accepted + st.rejected;
  }
  const Matrix u_eigen = u;
  out.unitarity_defect = unitarity_defect(u_eigen);
  out.u = system.from_eigenbasis(u_eigen);
  return out;
}

struct TimeDependentResult {
  DensityMatrix rho;
  Propagator propagator;
};

/// rho_tau = U_I rho U_I^dagger with U_I propagated over the full pulse.
inline TimeDependentResult time_dependent_evolve(const InternalSystem& system,
                                                 const CouplingOperator& nu,
                                                 const TemporalPotential& pulse,
                                                 const DensityMatrix& rho, double ode_tol = 1e-10) {
  require_same_dim(rho.dim(), system.dim(), "time_dependent_evolve");
  Propagator prop =
      interaction_propagator(system, nu, pulse, -0.5 * pulse.tau(), 0.5 * pulse.tau(), ode_tol);
  if (prop.unitarity_defect > kMaxPropagatorDefect) {
    throw NumericalError("time_dependent_evolve: propagator unitarity defect " +
                         std::to_string(prop.unitarity_defect));
  }
  Matrix out = prop.u * rho.matrix() * prop.u.adjoint();
  out = hermitian_part(out);
  return TimeDependentResult{DensityMatrix(std::move(out), 1e-8), std::move(prop)};
}

/// First Magnus term with V_I ~ V: exp(-i tau <V~> nu / hbar) (product basis).
inline Matrix magnus_first_order(const CouplingOperator& nu, const TemporalPotential& pulse) {
  return unitary_from_generator(nu.matrix(), pulse.tau() * pulse.mean() / kHbar);
}

/// max-abs norm of the second Magnus term
///   Omega_2 = (1/2)(-i/hbar)^2 int_{-tau/2}^{tau/2} dt int_{-tau/2}^{t} dt' [V_I(t), V_I(t')],
/// evaluated by product Gauss-Legendre quadrature split at the pulse kinks.
inline double magnus_second_order_norm(const InternalSystem& system, const CouplingOperator& nu,
                                       const TemporalPotential& pulse, std::size_t nodes = 48) {
  require_same_dim(nu.dim(), system.dim(), "magnus_second_order_norm");
  const Matrix nu_e = system.to_eigenbasis(nu.matrix());
  const RealVector& e = system.energies();
  const auto n = static_cast<Eigen::Index>(system.dim());
  auto v_i = [&](double t) {
    Eigen::VectorXcd ph(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      ph(j) = std::exp(cplx(0.0, e(j) * t / kHbar));
    }
    return Matrix(pulse(t) * (ph.asDiagonal() * nu_e * ph.conjugate().asDiagonal()));
  };
  std::vector<double> edges{-0.5 * pulse.tau(), 0.5 * pulse.tau()};
  for (double k : pulse.kinks()) {
    edges.push_back(k);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  const GaussLegendreRule& rule = gauss_legendre(nodes);
  auto integrate = [&](double lo, double hi, auto&& f) {
    Matrix acc = Matrix::Zero(n, n);
    // Split the interval at interior kinks.
    std::vector<double> cuts{lo};
    for (double k : edges) {
      if (k > lo && k < hi) {
        cuts.push_back(k);
      }
    }
    cuts.push_back(hi);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double half = 0.5 * (cuts[c + 1] - cuts[c]);
      const double mid = 0.5 * (cuts[c + 1] + cuts[c]);
      for (std::size_t i = 0; i < nodes; ++i) {
        acc += rule.weights[i] * half * f(mid + half * rule.nodes[i]);
      }
    }
    return acc;
  };
  const Matrix total = integrate(edges.front(), edges.back(), [&](double t) {
    const Matrix vt = v_i(t);
    const Matrix inner = integrate(edges.front(), t, [&](double tp) { return v_i(tp); });
    return Matrix(vt * inner - inner * vt);
  });
  return max_abs(-0.5 / (kHbar * kHbar) * total);
}

}  // namespace qscat
