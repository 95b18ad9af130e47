#pragma once

// Adaptive Dormand-Prince 5(4) driver on real state vectors. Complex systems
// are integrated on their interleaved (re, im) storage.
//
// Higher-order Fehlberg pairs are not used: for right-hand sides that are
// dominated by an explicit oscillation in x (the scattering equations at high
// momentum) their error estimate nearly cancels and steps are accepted far
// beyond the requested accuracy.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <boost/numeric/odeint/stepper/controlled_step_result.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_dopri5.hpp>

#include "qscat/error.hpp"

namespace qscat {

using OdeState = std::vector<double>;

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

struct OdeOptions {
  double tol = 1e-10;
  std::size_t max_steps = 20'000'000;
  /// Relative (to the interval length) step size below which the run fails.
  double min_relative_step = 1e-14;
};

/// Integrates y' = f(y, t) from t0 to t1 (either direction). Local error per
/// step is controlled to `opts.tol` in both absolute and relative sense.
template <class System>
OdeStats integrate_ode(System&& system, OdeState& y, double t0, double t1,
                       const OdeOptions& opts = {}) {
  namespace odeint = boost::numeric::odeint;
  using Stepper = odeint::runge_kutta_dopri5<OdeState>;
  auto controller = odeint::make_controlled(opts.tol, opts.tol, Stepper());

  OdeStats stats;
  const double length = std::abs(t1 - t0);
  if (length == 0.0) {
    return stats;
  }
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double min_step = opts.min_relative_step * length;
  double t = t0;
  double dt = dir * length / 64.0;
  while (dir * (t1 - t) > 0.0) {
    if (dir * (t + dt - t1) > 0.0) {
      dt = t1 - t;
    }
    const odeint::controlled_step_result r = controller.try_step(std::ref(system), y, t, dt);
    if (r == odeint::success) {
      ++stats.accepted;
      if (stats.accepted > opts.max_steps) {
        throw NumericalError("ODE integration exceeded the maximum number of steps");
      }
    } else {
      ++stats.rejected;
      if (std::abs(dt) < min_step) {
        throw NumericalError("ODE step-size underflow at t = " + std::to_string(t));
      }
    }
    // Snap to the endpoint to avoid a sliver step from rounding.
    if (dir * (t1 - t) < 1e-15 * length) {
      t = t1;
    }
  }
  return stats;
}

}  // namespace qscat
