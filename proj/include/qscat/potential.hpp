#pragma once

// Scalar interaction profiles: V(x) for the scattering setup and V~(t) for the
// time-dependent model. Both are compactly supported on a symmetric interval.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "qscat/core.hpp"

namespace qscat {

namespace detail {

// Piecewise-linear profile on a uniform grid over [-half, half].
class SampledProfile {
 public:
  SampledProfile() = default;
  SampledProfile(double half_width, std::vector<double> values)
      : half_(half_width), values_(std::move(values)) {
    if (values_.size() < 2) {
      throw InvalidArgument("sampled profile needs at least two samples");
    }
    step_ = 2.0 * half_ / static_cast<double>(values_.size() - 1);
  }

  double operator()(double x) const {
    if (x <= -half_ || x >= half_) {
      return 0.0;
    }
    const double s = (x + half_) / step_;
    auto i = static_cast<std::size_t>(s);
    if (i >= values_.size() - 1) {
      i = values_.size() - 2;
    }
    const double f = s - static_cast<double>(i);
    return (1.0 - f) * values_[i] + f * values_[i + 1];
  }

  double integral() const {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < values_.size(); ++i) {
      acc += 0.5 * (values_[i] + values_[i + 1]) * step_;
    }
    return acc;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) {
      m = std::max(m, std::abs(v));
    }
    return m;
  }

  double max_abs_slope() const {
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < values_.size(); ++i) {
      m = std::max(m, std::abs(values_[i + 1] - values_[i]) / step_);
    }
    return m;
  }

  bool symmetric() const {
    const std::size_t n = values_.size();
    for (std::size_t i = 0; i < n / 2; ++i) {
      if (values_[i] != values_[n - 1 - i]) {
        return false;
      }
    }
    return true;
  }

  std::vector<double> nodes() const {
    std::vector<double> out;
    for (std::size_t i = 1; i + 1 < values_.size(); ++i) {
      out.push_back(-half_ + static_cast<double>(i) * step_);
    }
    return out;
  }

  SampledProfile scaled(double factor) const {
    std::vector<double> v = values_;
    for (double& x : v) {
      x *= factor;
    }
    return SampledProfile(half_, std::move(v));
  }

  SampledProfile mirrored() const {
    std::vector<double> v(values_.rbegin(), values_.rend());
    return SampledProfile(half_, std::move(v));
  }

  const std::vector<double>& values() const { return values_; }

 private:
  double half_ = 0.0;
  double step_ = 1.0;
  std::vector<double> values_;
};

}  // namespace detail

/// V(x), non-zero only for |x| < a/2.
class SpatialPotential {
 public:
  enum class Kind { sinusoidal, square, sampled };

  /// V(x) = (pi/2) V0 cos(pi x / a); <V> = V0.
  static SpatialPotential sinusoidal(double a, double v0) {
    return SpatialPotential(Kind::sinusoidal, a, v0, {});
  }
  /// V(x) = V0 on (-a/2, a/2).
  static SpatialPotential square(double a, double v0) {
    return SpatialPotential(Kind::square, a, v0, {});
  }
  /// Piecewise-linear interpolation of `values` sampled uniformly on [-a/2, a/2].
  /// The height scale V0 is defined as the mean <V>.
  static SpatialPotential sampled(double a, std::vector<double> values) {
    detail::SampledProfile prof(0.5 * a, std::move(values));
    const double mean = prof.integral() / a;
    return SpatialPotential(Kind::sampled, a, mean, std::move(prof));
  }

  Kind kind() const { return kind_; }
  double a() const { return a_; }
  double v0() const { return v0_; }

  double operator()(double x) const {
    if (std::abs(x) >= 0.5 * a_) {
      return 0.0;
    }
    switch (kind_) {
      case Kind::sinusoidal:
        return 0.5 * kPi * v0_ * std::cos(kPi * x / a_);
      case Kind::square:
        return v0_;
      case Kind::sampled:
        return samples_(x);
    }
    return 0.0;
  }

  /// <V> = (1/a) * integral of V over the support.
  double mean() const {
    return kind_ == Kind::sampled ? samples_.integral() / a_ : v0_;
  }

  double max_abs() const {
    switch (kind_) {
      case Kind::sinusoidal:
        return 0.5 * kPi * std::abs(v0_);
      case Kind::square:
        return std::abs(v0_);
      case Kind::sampled:
        return samples_.max_abs();
    }
    return 0.0;
  }

  /// Minimal length over which V varies. Analytic kinds use a; sampled
  /// profiles use max|V| / max|V'|.
  double a_min() const {
    if (kind_ != Kind::sampled) {
      return a_;
    }
    const double slope = samples_.max_abs_slope();
    return slope == 0.0 ? a_ : samples_.max_abs() / slope;
  }

  bool symmetric() const { return kind_ != Kind::sampled || samples_.symmetric(); }

  /// Interior points where V is not smooth.
  std::vector<double> kinks() const {
    return kind_ == Kind::sampled ? samples_.nodes() : std::vector<double>{};
  }

  /// Same shape rescaled so that <V> = new_mean.
  SpatialPotential with_mean(double new_mean) const {
    if (kind_ != Kind::sampled) {
      return SpatialPotential(kind_, a_, new_mean, {});
    }
    const double m = mean();
    if (m == 0.0) {
      throw InvalidArgument("cannot rescale a zero-mean sampled potential");
    }
    detail::SampledProfile prof = samples_.scaled(new_mean / m);
    return SpatialPotential(kind_, a_, new_mean, std::move(prof));
  }

  /// V(-x)
  SpatialPotential mirrored() const {
    if (kind_ != Kind::sampled) {
      return *this;
    }
    return SpatialPotential(kind_, a_, v0_, samples_.mirrored());
  }

  const std::vector<double>& samples() const { return samples_.values(); }

 private:
  SpatialPotential(Kind kind, double a, double v0, detail::SampledProfile samples)
      : kind_(kind), a_(a), v0_(v0), samples_(std::move(samples)) {
    if (!(a_ > 0.0) || !std::isfinite(a_)) {
      throw InvalidArgument("SpatialPotential: support length a must be positive");
    }
    if (!std::isfinite(v0_)) {
      throw InvalidArgument("SpatialPotential: V0 must be finite");
    }
  }

  Kind kind_;
  double a_;
  double v0_;
  detail::SampledProfile samples_;
};

/// V~(t), non-zero only for |t| < tau/2.
class TemporalPotential {
 public:
  enum class Kind { triangular, square, sampled };

  /// V~(t) = (4/tau) V0 (tau/2 - |t|); <V~> = V0.
  static TemporalPotential triangular(double tau, double v0) {
    return TemporalPotential(Kind::triangular, tau, v0, {});
  }
  static TemporalPotential square(double tau, double v0) {
    return TemporalPotential(Kind::square, tau, v0, {});
  }
  static TemporalPotential sampled(double tau, std::vector<double> values) {
    detail::SampledProfile prof(0.5 * tau, std::move(values));
    const double mean = prof.integral() / tau;
    return TemporalPotential(Kind::sampled, tau, mean, std::move(prof));
  }

  Kind kind() const { return kind_; }
  double tau() const { return tau_; }
  double v0() const { return v0_; }

  double operator()(double t) const {
    if (std::abs(t) >= 0.5 * tau_) {
      return 0.0;
    }
    switch (kind_) {
      case Kind::triangular:
        return 4.0 / tau_ * v0_ * (0.5 * tau_ - std::abs(t));
      case Kind::square:
        return v0_;
      case Kind::sampled:
        return samples_(t);
    }
    return 0.0;
  }

  double mean() const {
    return kind_ == Kind::sampled ? samples_.integral() / tau_ : v0_;
  }

  std::vector<double> kinks() const {
    switch (kind_) {
      case Kind::triangular:
        return {0.0};
      case Kind::square:
        return {};
      case Kind::sampled:
        return samples_.nodes();
    }
    return {};
  }

  TemporalPotential with_mean(double new_mean) const {
    if (kind_ != Kind::sampled) {
      return TemporalPotential(kind_, tau_, new_mean, {});
    }
    const double m = mean();
    if (m == 0.0) {
      throw InvalidArgument("cannot rescale a zero-mean sampled pulse");
    }
    detail::SampledProfile prof = samples_.scaled(new_mean / m);
    return TemporalPotential(kind_, tau_, new_mean, std::move(prof));
  }

 private:
  TemporalPotential(Kind kind, double tau, double v0, detail::SampledProfile samples)
      : kind_(kind), tau_(tau), v0_(v0), samples_(std::move(samples)) {
    if (!(tau_ > 0.0) || !std::isfinite(tau_)) {
      throw InvalidArgument("TemporalPotential: duration tau must be positive");
    }
    if (!std::isfinite(v0_)) {
      throw InvalidArgument("TemporalPotential: V0 must be finite");
    }
  }

  Kind kind_;
  double tau_;
  double v0_;
  detail::SampledProfile samples_;
};

inline std::string to_string(SpatialPotential::Kind k) {
  switch (k) {
    case SpatialPotential::Kind::sinusoidal:
      return "sinusoidal";
    case SpatialPotential::Kind::square:
      return "square";
    case SpatialPotential::Kind::sampled:
      return "sampled";
  }
  return "?";
}

inline std::string to_string(TemporalPotential::Kind k) {
  switch (k) {
    case TemporalPotential::Kind::triangular:
      return "triangular";
    case TemporalPotential::Kind::square:
      return "square";
    case TemporalPotential::Kind::sampled:
      return "sampled";
  }
  return "?";
}

}  // namespace qscat
