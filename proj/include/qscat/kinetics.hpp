#pragma once

// Kinetic state of the projectile: Gaussian pure and mixed states in the
// momentum representation, their Wigner functions, and the regime
// diagnostics that decide whether a collision acts unitarily.

#include <cmath>
#include <limits>
#include <string>

#include "qscat/core.hpp"
#include "qscat/potential.hpp"

namespace qscat {

/// Gaussian state of motion rho_X(p, p'). Pure states are stored through
/// their wave function phi(p); mixed states through the phase-space Gaussian.
class KineticState {
 public:
  /// phi(p) = exp[-(p-p0)^2/(4 sigma_p^2) - i p x0] / (2 pi sigma_p^2)^{1/4}
  static KineticState gaussian_pure(double p0, double x0, double sigma_p, double mass = 1.0) {
    if (!(sigma_p > 0.0)) {
      throw InvalidArgument("gaussian_pure: sigma_p must be positive");
    }
    return KineticState(true, p0, x0, sigma_p, kHbar / (2.0 * sigma_p), mass);
  }

  /// Gaussian Wigner function with independent widths; requires
  /// sigma_p * sigma_x >= hbar / 2.
  static KineticState gaussian_mixed(double p0, double x0, double sigma_p, double sigma_x,
                                     double mass = 1.0) {
    if (!(sigma_p > 0.0) || !(sigma_x > 0.0)) {
      throw InvalidArgument("gaussian_mixed: widths must be positive");
    }
    if (sigma_p * sigma_x < 0.5 * kHbar - 1e-12) {
      throw InvalidArgument("gaussian_mixed: uncertainty relation violated");
    }
    return KineticState(false, p0, x0, sigma_p, sigma_x, mass);
  }

  double p0() const { return p0_; }
  double x0() const { return x0_; }
  double sigma_p() const { return sigma_p_; }
  double sigma_x() const { return sigma_x_; }
  double mass() const { return mass_; }
  bool constructed_pure() const { return pure_; }

  /// Kinetic energy at the mean momentum.
  double mean_energy() const { return p0_ * p0_ / (2.0 * mass_); }

  /// phi(p); only meaningful for states built with gaussian_pure.
  cplx wave_function(double p) const {
    const double d = p - p0_;
    const double norm = std::pow(2.0 * kPi * sigma_p_ * sigma_p_, -0.25);
    return norm * std::exp(cplx(-d * d / (4.0 * sigma_p_ * sigma_p_), -p * x0_ / kHbar));
  }

  /// <p|rho_X|p'>
  cplx rho(double p, double pp) const {
    if (pure_) {
      return wave_function(p) * std::conj(wave_function(pp));
    }
    const double u = 0.5 * (p + pp) - p0_;
    const double v = p - pp;
    const double amp = std::exp(-u * u / (2.0 * sigma_p_ * sigma_p_) -
                                v * v * sigma_x_ * sigma_x_ / (2.0 * kHbar * kHbar)) /
                       std::sqrt(2.0 * kPi * sigma_p_ * sigma_p_);
    return amp * std::exp(cplx(0.0, -v * x0_ / kHbar));
  }

  /// <p|rho_X|p>, a normalised Gaussian in p.
  double momentum_density(double p) const {
    const double d = p - p0_;
    return std::exp(-d * d / (2.0 * sigma_p_ * sigma_p_)) / std::sqrt(2.0 * kPi * sigma_p_ * sigma_p_);
  }

  /// Closed-form Wigner function: a normalised 2D Gaussian centred on (p0, x0).
  double wigner(double p, double x) const {
    const double dp = p - p0_;
    const double dx = x - x0_;
    return std::exp(-dp * dp / (2.0 * sigma_p_ * sigma_p_) - dx * dx / (2.0 * sigma_x_ * sigma_x_)) /
           (2.0 * kPi * sigma_p_ * sigma_x_);
  }

  /// Tr rho_X^2 = hbar / (2 sigma_p sigma_x)
  double purity() const { return kHbar / (2.0 * sigma_p_ * sigma_x_); }

  /// Same state translated to a new mean position.
  KineticState translated_to(double new_x0) const {
    KineticState s = *this;
    s.x0_ = new_x0;
    return s;
  }

 private:
  KineticState(bool pure, double p0, double x0, double sigma_p, double sigma_x, double mass)
      : pure_(pure), p0_(p0), x0_(x0), sigma_p_(sigma_p), sigma_x_(sigma_x), mass_(mass) {
    if (!(mass_ > 0.0)) {
      throw InvalidArgument("KineticState: mass must be positive");
    }
    if (!std::isfinite(p0_) || !std::isfinite(x0_)) {
      throw InvalidArgument("KineticState: p0 and x0 must be finite");
    }
  }

  bool pure_;
  double p0_;
  double x0_;
  double sigma_p_;
  double sigma_x_;
  double mass_;
};

inline double wigner(const KineticState& state, double p, double x) { return state.wigner(p, x); }
inline double purity(const KineticState& state) { return state.purity(); }

/// Threshold applied to every "much less than" ratio.
inline constexpr double kMuchLessThreshold = 0.1;

/// Dimensionless ratios behind the validity conditions of the unitary
/// collision result. Each `*_ok` flag means every ratio of that condition is
/// below kMuchLessThreshold.
struct RegimeReport {
  double tau_p0 = 0.0;        ///< m a / p0
  double cond1 = 0.0;         ///< tau_p0 Delta_Y / hbar
  double cond2a = 0.0;        ///< max|V(x)| / E_p0
  double cond2b = 0.0;        ///< hbar / (p0 a_min)
  double cond3a = 0.0;        ///< sigma_p / p0
  double cond3b = 0.0;        ///< (m Delta_Y / p0) / (hbar / 2 sigma_x)
  double phase_ratio = 0.0;   ///< (m Delta_Y / p0) / (hbar / |x0|)
  bool broad = false;         ///< hbar / (2 sigma_x) > m Delta_Y / p0
  bool phase_ok = false;
  bool cond1_ok = false;
  bool cond2_ok = false;
  bool cond3_ok = false;

  bool all_ok() const { return cond1_ok && cond2_ok && cond3_ok && phase_ok; }
};

inline RegimeReport classify_regime(const KineticState& state, const InternalSystem& system,
                                    const SpatialPotential& potential) {
  if (!(state.p0() > 0.0)) {
    throw InvalidArgument("classify_regime: p0 must be positive");
  }
  const double m = state.mass();
  const double p0 = state.p0();
  const double span = system.span();
  const double recoil = m * span / p0;  // m Delta_Y / p0

  RegimeReport r;
  r.tau_p0 = m * potential.a() / p0;
  r.cond1 = r.tau_p0 * span / kHbar;
  r.cond2a = potential.max_abs() / state.mean_energy();
  r.cond2b = kHbar / (p0 * potential.a_min());
  r.cond3a = state.sigma_p() / p0;
  r.cond3b = recoil / (kHbar / (2.0 * state.sigma_x()));
  r.phase_ratio = recoil * std::abs(state.x0()) / kHbar;
  r.broad = kHbar / (2.0 * state.sigma_x()) > recoil;
  r.phase_ok = r.phase_ratio < kMuchLessThreshold;
  r.cond1_ok = r.cond1 < kMuchLessThreshold;
  r.cond2_ok = r.cond2a < kMuchLessThreshold && r.cond2b < kMuchLessThreshold;
  r.cond3_ok = r.cond3a < kMuchLessThreshold && r.cond3b < kMuchLessThreshold;
  return r;
}

}  // namespace qscat
