#pragma once

// Multichannel 1D scattering matrix s^{(a'a)}_{j'j}(E) in the H_Y eigenbasis.
//
// The exact solver integrates the invariant-imbedding (Razavy) equations for
// the position-dependent reflection and transmission matrices r(x), t(x) of
// the potential truncated to [x, +inf). Outside the support r = 0 and t = I,
// so integration runs from x = +a/2 down to x = -a/2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "qscat/core.hpp"
#include "qscat/ode.hpp"
#include "qscat/parallel.hpp"
#include "qscat/potential.hpp"

namespace qscat {

/// Diagnostic threshold above which a solve is flagged.
inline constexpr double kUnitarityFlagThreshold = 1e-4;

/// Flux-normalised scattering matrix at one total energy. Blocks are indexed
/// (outgoing channel j', incoming channel j).
struct SMatrixAtE {
  double energy = 0.0;
  RealVector momenta;  ///< p_j = sqrt(2 m (E - e_j))
  Matrix t;            ///< s^{(++)}: transmission, incidence from the left
  Matrix r;            ///< s^{(-+)}: reflection, incidence from the left
  Matrix t_bar;        ///< s^{(--)}: transmission, incidence from the right
  Matrix r_bar;        ///< s^{(+-)}: reflection, incidence from the right
  bool has_right_incidence = false;
  double defect = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;
  std::size_t ode_steps = 0;

  std::size_t channels() const { return static_cast<std::size_t>(t.rows()); }

  /// s^{(a' +)}_{j'j} with a' = +1 (transmitted) or -1 (reflected).
  cplx left(int alpha_out, std::size_t jp, std::size_t j) const {
    const auto r_i = static_cast<Eigen::Index>(jp);
    const auto c_i = static_cast<Eigen::Index>(j);
    return alpha_out > 0 ? t(r_i, c_i) : r(r_i, c_i);
  }

  /// Full 2N x 2N matrix with (+, -) ordering of directions:
  /// [[s^{++}, s^{+-}], [s^{-+}, s^{--}]].
  Matrix full() const {
    if (!has_right_incidence) {
      throw InvalidArgument("SMatrixAtE::full: right-incidence blocks were not computed");
    }
    const Eigen::Index n = t.rows();
    Matrix s(2 * n, 2 * n);
    s.topLeftCorner(n, n) = t;
    s.topRightCorner(n, n) = r_bar;
    s.bottomLeftCorner(n, n) = r;
    s.bottomRightCorner(n, n) = t_bar;
    return s;
  }
};

/// ||S^dagger S - I||_max over the open-channel matrix. Without the
/// right-incidence blocks only the left-incidence columns are checked.
inline double unitarity_defect(const SMatrixAtE& s) {
  if (s.has_right_incidence) {
    return unitarity_defect(s.full());
  }
  const Eigen::Index n = s.t.rows();
  Matrix cols(2 * n, n);
  cols.topRows(n) = s.t;
  cols.bottomRows(n) = s.r;
  return max_abs(cols.adjoint() * cols - Matrix::Identity(n, n));
}

struct SolveOptions {
  double ode_tol = 1e-10;
  double mass = 1.0;
  /// Also compute s^{(--)}, s^{(+-)}; needed for the full unitarity defect.
  bool right_incidence = true;
};

namespace detail {

// Right-hand side of the coupled equations for r(x), t(x). State layout:
// [r (N*N complex, column-major), t (N*N complex)] on interleaved doubles.
class ImbeddingEquations {
 public:
  ImbeddingEquations(const RealVector& momenta, const Matrix& nu_eigen,
                     std::function<double(double)> profile, double mass)
      : p_(momenta), profile_(std::move(profile)), mass_(mass) {
    const Eigen::Index n = p_.size();
    nu_scaled_ = nu_eigen;
    for (Eigen::Index row = 0; row < n; ++row) {
      nu_scaled_.row(row) /= p_(row);
    }
    phase_.resize(n);
    a_.resize(n, n);
    b_.resize(n, n);
    g_.resize(n, n);
    te_.resize(n, n);
  }

  void operator()(const OdeState& y, OdeState& dydx, double x) const {
    const Eigen::Index n = p_.size();
    const Eigen::Index nn = n * n;
    const double v = profile_(x);
    if (v == 0.0) {
      std::fill(dydx.begin(), dydx.end(), 0.0);
      return;
    }
    const auto* yc = reinterpret_cast<const cplx*>(y.data());
    auto* dc = reinterpret_cast<cplx*>(dydx.data());
    Eigen::Map<const Matrix> r(yc, n, n);
    Eigen::Map<const Matrix> t(yc + nn, n, n);
    Eigen::Map<Matrix> dr(dc, n, n);
    Eigen::Map<Matrix> dt(dc + nn, n, n);

    for (Eigen::Index k = 0; k < n; ++k) {
      phase_(k) = std::exp(cplx(0.0, p_(k) * x / kHbar));
    }
    // b = e^{iPx} + e^{-iPx} r,  a = e^{iPx} + r e^{-iPx}
    b_.noalias() = phase_.conjugate().asDiagonal() * r;
    b_.diagonal() += phase_;
    a_.noalias() = r * phase_.conjugate().asDiagonal();
    a_.diagonal() += phase_;
    // g = P^{-1} nu b
    g_.noalias() = nu_scaled_ * b_;
    const cplx c = kI * mass_ * v / kHbar;
    dr.noalias() = a_ * g_;
    dr *= c;
    te_.noalias() = t * phase_.conjugate().asDiagonal();
    dt.noalias() = te_ * g_;
    dt *= c;
  }

 private:
  RealVector p_;
  Matrix nu_scaled_;
  std::function<double(double)> profile_;
  double mass_;
  mutable Eigen::VectorXcd phase_;
  mutable Matrix a_;
  mutable Matrix b_;
  mutable Matrix g_;
  mutable Matrix te_;
};

struct ImbeddingResult {
  Matrix r;
  Matrix t;
  std::size_t steps = 0;
};

inline ImbeddingResult integrate_imbedding(const RealVector& momenta, const Matrix& nu_eigen,
                                           const SpatialPotential& potential, double mass,
                                           double ode_tol) {
  const Eigen::Index n = momenta.size();
  const Eigen::Index nn = n * n;
  OdeState y(static_cast<std::size_t>(4 * nn), 0.0);
  auto* yc = reinterpret_cast<cplx*>(y.data());
  for (Eigen::Index k = 0; k < n; ++k) {
    yc[nn + k * n + k] = 1.0;  // t(+a/2) = I
  }
  ImbeddingEquations rhs(momenta, nu_eigen, [&potential](double x) { return potential(x); },
                         mass);
  std::vector<double> stops = potential.kinks();
  stops.push_back(0.5 * potential.a());
  stops.push_back(-0.5 * potential.a());
  std::sort(stops.begin(), stops.end(), std::greater<>());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  OdeOptions opts;
  opts.tol = ode_tol;
  ImbeddingResult out;
  for (std::size_t i = 0; i + 1 < stops.size(); ++i) {
    const OdeStats st = integrate_ode(rhs, y, stops[i], stops[i + 1], opts);
    out.steps += st.accepted + st.rejected;
  }
  out.r = Eigen::Map<const Matrix>(yc, n, n);
  out.t = Eigen::Map<const Matrix>(yc + nn, n, n);
  return out;
}

inline Matrix flux_normalise(const Matrix& m, const RealVector& momenta) {
  Matrix out = m;
  for (Eigen::Index row = 0; row < m.rows(); ++row) {
    for (Eigen::Index col = 0; col < m.cols(); ++col) {
      out(row, col) *= std::sqrt(momenta(row) / momenta(col));
    }
  }
  return out;
}

}  // namespace detail

/// Channel momenta at total energy E; throws if any channel is closed, i.e.
/// E - e_j < 1e-6 |E| for some j.
inline RealVector open_channel_momenta(const InternalSystem& system, double energy,
                                       double mass = 1.0) {
  const Eigen::Index n = static_cast<Eigen::Index>(system.dim());
  RealVector p(n);
  const double margin = 1e-6 * std::abs(energy);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double kinetic = energy - system.energies()(j);
    if (!(kinetic > 0.0) || kinetic < margin) {
      throw NumericalError("closed channel at E = " + std::to_string(energy) +
                           " (channel " + std::to_string(j) + ")");
    }
    p(j) = std::sqrt(2.0 * mass * kinetic);
  }
  return p;
}

/// Exact s-matrix at total energy E.
inline SMatrixAtE solve_multichannel(const InternalSystem& system, const CouplingOperator& nu,
                                     const SpatialPotential& potential, double energy,
                                     const SolveOptions& opts = {}) {
  require_same_dim(nu.dim(), system.dim(), "solve_multichannel");
  if (!(opts.ode_tol > 0.0)) {
    throw InvalidArgument("solve_multichannel: ode_tol must be positive");
  }
  SMatrixAtE s;
  s.energy = energy;
  s.momenta = open_channel_momenta(system, energy, opts.mass);
  const Matrix nu_e = system.to_eigenbasis(nu.matrix());

  const detail::ImbeddingResult left =
      detail::integrate_imbedding(s.momenta, nu_e, potential, opts.mass, opts.ode_tol);
  s.t = detail::flux_normalise(left.t, s.momenta);
  s.r = detail::flux_normalise(left.r, s.momenta);
  s.ode_steps = left.steps;

  if (opts.right_incidence) {
    if (potential.symmetric()) {
      s.t_bar = s.t;
      s.r_bar = s.r;
    } else {
      const detail::ImbeddingResult right = detail::integrate_imbedding(
          s.momenta, nu_e, potential.mirrored(), opts.mass, opts.ode_tol);
      s.t_bar = detail::flux_normalise(right.t, s.momenta);
      s.r_bar = detail::flux_normalise(right.r, s.momenta);
      s.ode_steps += right.steps;
    }
    s.has_right_incidence = true;
  }
  s.defect = unitarity_defect(s);
  s.flagged = !(s.defect <= kUnitarityFlagThreshold);
  return s;
}

/// High-energy limit: no reflection, t = <j'| exp(-i tau_p <V> nu / hbar) |j>
/// with tau_p = m a / p. All channel momenta are taken equal to p.
inline SMatrixAtE semiclassical_smatrix(const InternalSystem& system, const CouplingOperator& nu,
                                        const SpatialPotential& potential, double p,
                                        double mass = 1.0) {
  require_same_dim(nu.dim(), system.dim(), "semiclassical_smatrix");
  if (!(p > 0.0)) {
    throw InvalidArgument("semiclassical_smatrix: p must be positive");
  }
  const auto n = static_cast<Eigen::Index>(system.dim());
  const double tau_p = mass * potential.a() / p;
  SMatrixAtE s;
  s.energy = p * p / (2.0 * mass);
  s.momenta = RealVector::Constant(n, p);
  s.t = system.to_eigenbasis(unitary_from_generator(nu.matrix(), tau_p * potential.mean() / kHbar));
  s.r = Matrix::Zero(n, n);
  s.t_bar = s.t;
  s.r_bar = s.r;
  s.has_right_incidence = true;
  s.defect = unitarity_defect(s);
  s.flagged = false;
  return s;
}

/// Memoising exact solver for one (system, nu, V, tol). Energies are keyed
/// after rounding to ~1e-12 relative precision; concurrent use is safe.
class SMatrixSolver {
 public:
  SMatrixSolver(InternalSystem system, CouplingOperator nu, SpatialPotential potential,
                SolveOptions opts = {})
      : system_(std::move(system)),
        nu_(std::move(nu)),
        potential_(std::move(potential)),
        opts_(opts) {}

  std::shared_ptr<const SMatrixAtE> at(double energy) const {
    const double key = energy_key(energy);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end()) {
        return it->second;
      }
    }
    auto solved = std::make_shared<const SMatrixAtE>(
        solve_multichannel(system_, nu_, potential_, key, opts_));
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, inserted] = cache_.emplace(key, std::move(solved));
    if (inserted) {
      ++solves_;
      max_defect_ = std::max(max_defect_, it->second->defect);
    }
    return it->second;
  }

  std::size_t solves() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return solves_;
  }

  /// Largest unitarity defect among all solves so far.
  double max_defect() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return max_defect_;
  }

  const InternalSystem& system() const { return system_; }
  const CouplingOperator& coupling() const { return nu_; }
  const SpatialPotential& potential() const { return potential_; }
  const SolveOptions& options() const { return opts_; }

  static double energy_key(double energy) {
    if (energy == 0.0 || !std::isfinite(energy)) {
      return energy;
    }
    int exponent = 0;
    std::frexp(energy, &exponent);
    const double quantum = std::ldexp(1.0, exponent - 40);
    return std::nearbyint(energy / quantum) * quantum;
  }

 private:
  InternalSystem system_;
  CouplingOperator nu_;
  SpatialPotential potential_;
  SolveOptions opts_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::shared_ptr<const SMatrixAtE>> cache_;
  mutable std::size_t solves_ = 0;
  mutable double max_defect_ = 0.0;
};

/// Number of points for a uniform energy grid on [e_min, e_max] such that
/// reflection phases (rate ~ m a / p per unit energy) advance by at most
/// `phase_step` between neighbours, with at least `min_points`.
inline std::size_t recommended_grid_points(double e_min, double e_max, double p_min, double a,
                                           double mass, std::size_t min_points,
                                           double phase_step = 0.1) {
  const double max_step = phase_step * p_min / (mass * a);
  const auto needed = static_cast<std::size_t>(std::ceil((e_max - e_min) / max_step)) + 1;
  return std::max(min_points, needed);
}

/// Exact s-matrices pre-solved on a uniform energy grid, read back through
/// 4-point (cubic) Lagrange interpolation of every element.
class SMatrixGrid {
 public:
  SMatrixGrid(const SMatrixSolver& solver, double e_min, double e_max, std::size_t points,
              unsigned threads = 1)
      : e_min_(e_min), e_max_(e_max) {
    if (points < 4 || !(e_max > e_min)) {
      throw InvalidArgument("SMatrixGrid: need at least 4 points on a non-empty range");
    }
    step_ = (e_max - e_min) / static_cast<double>(points - 1);
    table_.resize(points);
    parallel_for(points, threads, [&](std::size_t i) {
      table_[i] = solver.at(e_min_ + static_cast<double>(i) * step_);
    });
    for (const auto& s : table_) {
      max_defect_ = std::max(max_defect_, s->defect);
    }
  }

  double e_min() const { return e_min_; }
  double e_max() const { return e_max_; }
  double step() const { return step_; }
  std::size_t points() const { return table_.size(); }
  double max_defect() const { return max_defect_; }
  const SMatrixAtE& node(std::size_t i) const { return *table_[i]; }

  /// Interpolated s^{(a'+)}_{j'j}(E).
  cplx left(int alpha_out, std::size_t jp, std::size_t j, double energy) const {
    const Stencil st = stencil(energy);
    cplx acc = 0.0;
    for (int k = 0; k < 4; ++k) {
      acc += st.w[k] * table_[st.first + static_cast<std::size_t>(k)]->left(alpha_out, jp, j);
    }
    return acc;
  }

  /// All left-incidence blocks interpolated at E.
  SMatrixAtE interpolate(double energy) const {
    const Stencil st = stencil(energy);
    const SMatrixAtE& ref = *table_[st.first];
    SMatrixAtE out;
    out.energy = energy;
    out.t = Matrix::Zero(ref.t.rows(), ref.t.cols());
    out.r = Matrix::Zero(ref.r.rows(), ref.r.cols());
    for (int k = 0; k < 4; ++k) {
      const SMatrixAtE& s = *table_[st.first + static_cast<std::size_t>(k)];
      out.t += st.w[k] * s.t;
      out.r += st.w[k] * s.r;
    }
    if (ref.has_right_incidence) {
      out.t_bar = Matrix::Zero(ref.t.rows(), ref.t.cols());
      out.r_bar = Matrix::Zero(ref.r.rows(), ref.r.cols());
      for (int k = 0; k < 4; ++k) {
        const SMatrixAtE& s = *table_[st.first + static_cast<std::size_t>(k)];
        out.t_bar += st.w[k] * s.t_bar;
        out.r_bar += st.w[k] * s.r_bar;
      }
      out.has_right_incidence = true;
    }
    out.defect = unitarity_defect(out);
    return out;
  }

 private:
  struct Stencil {
    std::size_t first;
    double w[4];
  };

  Stencil stencil(double energy) const {
    const double tol = 1e-9 * step_;
    if (energy < e_min_ - tol || energy > e_max_ + tol) {
      throw NumericalError("SMatrixGrid: energy " + std::to_string(energy) +
                           " outside the pre-solved range");
    }
    const double s = (energy - e_min_) / step_;
    const auto n = static_cast<long>(table_.size());
    long i = static_cast<long>(std::floor(s));
    long first = std::clamp(i - 1, 0L, n - 4);
    Stencil st{static_cast<std::size_t>(first), {}};
    const double u = s - static_cast<double>(first);  // position relative to node `first`
    for (int k = 0; k < 4; ++k) {
      double w = 1.0;
      for (int m = 0; m < 4; ++m) {
        if (m != k) {
          w *= (u - m) / static_cast<double>(k - m);
        }
      }
      st.w[k] = w;
    }
    return st;
  }

  double e_min_;
  double e_max_;
  double step_ = 0.0;
  double max_defect_ = 0.0;
  std::vector<std::shared_ptr<const SMatrixAtE>> table_;
};

}  // namespace qscat
