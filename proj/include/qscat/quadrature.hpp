#pragma once

// Composite Gauss-Legendre quadrature with adaptive panel doubling.

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include "qscat/core.hpp"
#include "qscat/parallel.hpp"

namespace qscat {

/// Nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

inline GaussLegendreRule compute_gauss_legendre(std::size_t n) {
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double z = std::cos(kPi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        const auto kd = static_cast<double>(k);
        p0 = ((2.0 * kd - 1.0) * z * p1 - (kd - 1.0) * p2) / kd;
      }
      dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) {
        break;
      }
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace detail

/// n-point rule, memoised per n.
inline const GaussLegendreRule& gauss_legendre(std::size_t n) {
  if (n == 0) {
    throw InvalidArgument("gauss_legendre: need at least one node");
  }
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<GaussLegendreRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<GaussLegendreRule>(detail::compute_gauss_legendre(n));
  }
  return *slot;
}

/// Quadrature points of `panels` equal sub-intervals of [lo, hi], each
/// carrying an n-point Gauss-Legendre rule.
struct CompositeRule {
  std::vector<double> points;
  std::vector<double> weights;
};

inline CompositeRule composite_gauss_legendre(double lo, double hi, std::size_t n,
                                              std::size_t panels) {
  const GaussLegendreRule& base = gauss_legendre(n);
  CompositeRule out;
  out.points.reserve(n * panels);
  out.weights.reserve(n * panels);
  const double width = (hi - lo) / static_cast<double>(panels);
  for (std::size_t k = 0; k < panels; ++k) {
    const double a = lo + static_cast<double>(k) * width;
    const double mid = a + 0.5 * width;
    for (std::size_t i = 0; i < n; ++i) {
      out.points.push_back(mid + 0.5 * width * base.nodes[i]);
      out.weights.push_back(0.5 * width * base.weights[i]);
    }
  }
  return out;
}

template <class Value>
struct QuadratureResult {
  Value value;
  std::size_t panels = 1;
  std::size_t evaluations = 0;
  /// Max-abs change between the last two refinement levels.
  double change = 0.0;
  bool converged = false;
};

namespace detail {
inline double distance(double a, double b) { return std::abs(a - b); }
inline double distance(cplx a, cplx b) { return std::abs(a - b); }
template <class Derived>
double distance(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Derived>& b) {
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}
}  // namespace detail

/// Integrates f over [lo, hi] with panels = 1, 2, 4, ... until two successive
/// estimates differ by less than `tol` (max-abs over all components).
/// `zero` fixes the shape of vector-valued results. With threads > 1 the
/// integrand is evaluated concurrently; the weighted sum is always taken in
/// node order so the result does not depend on the thread count.
template <class Value, class F>
QuadratureResult<Value> integrate_adaptive(F&& f, double lo, double hi, std::size_t nodes,
                                           double tol, std::size_t max_panels, Value zero,
                                           unsigned threads = 1) {
  QuadratureResult<Value> res{zero};
  if (!(hi > lo)) {
    res.converged = true;
    return res;
  }
  Value previous = zero;
  bool have_previous = false;
  std::vector<Value> samples;
  for (std::size_t panels = 1; panels <= max_panels; panels *= 2) {
    const CompositeRule rule = composite_gauss_legendre(lo, hi, nodes, panels);
    samples.assign(rule.points.size(), zero);
    parallel_for(rule.points.size(), threads, [&](std::size_t i) { samples[i] = f(rule.points[i]); });
    Value acc = zero;
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
      acc += rule.weights[i] * samples[i];
    }
    res.evaluations += rule.points.size();
    res.panels = panels;
    res.value = acc;
    if (have_previous) {
      res.change = detail::distance(acc, previous);
      if (res.change < tol) {
        res.converged = true;
        return res;
      }
    }
    previous = acc;
    have_previous = true;
  }
  return res;
}

}  // namespace qscat
