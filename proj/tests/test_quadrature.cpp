#include <cmath>
#include <complex>

#include "catch_amalgamated.hpp"

#include "qscat/quadrature.hpp"

using namespace qscat;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("Gauss-Legendre rule integrates polynomials exactly", "[quadrature]") {
  for (std::size_t n : {1u, 2u, 5u, 16u, 128u}) {
    const GaussLegendreRule& rule = gauss_legendre(n);
    REQUIRE(rule.nodes.size() == n);
    double wsum = 0.0;
    for (double w : rule.weights) {
      wsum += w;
    }
    CHECK_THAT(wsum, WithinAbs(2.0, 1e-13));
    // Degree 2n - 1 is exact; integral of x^k over [-1, 1] is 2/(k+1) for even k.
    for (std::size_t k = 0; k <= 2 * n - 1 && k <= 40; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += rule.weights[i] * std::pow(rule.nodes[i], static_cast<double>(k));
      }
      const double exact = k % 2 == 0 ? 2.0 / static_cast<double>(k + 1) : 0.0;
      CHECK_THAT(acc, WithinAbs(exact, 1e-13));
    }
  }
}

TEST_CASE("Gauss-Legendre nodes are sorted and symmetric", "[quadrature]") {
  const GaussLegendreRule& rule = gauss_legendre(33);
  for (std::size_t i = 1; i < 33; ++i) {
    CHECK(rule.nodes[i] > rule.nodes[i - 1]);
  }
  for (std::size_t i = 0; i < 33; ++i) {
    CHECK_THAT(rule.nodes[i] + rule.nodes[32 - i], WithinAbs(0.0, 1e-15));
  }
  CHECK_THROWS_AS(gauss_legendre(0), InvalidArgument);
}

TEST_CASE("adaptive quadrature of an oscillatory integrand", "[quadrature]") {
  // int_0^L exp(i k x) dx = (exp(i k L) - 1) / (i k)
  const double k = 250.0;
  const double len = 3.0;
  auto f = [k](double x) { return std::exp(cplx(0.0, k * x)); };
  const auto res = integrate_adaptive(f, 0.0, len, 32, 1e-12, 256, cplx(0.0));
  const cplx exact = (std::exp(cplx(0.0, k * len)) - 1.0) / cplx(0.0, k);
  REQUIRE(res.converged);
  CHECK(std::abs(res.value - exact) < 1e-11);
  CHECK(res.panels > 1);
}

TEST_CASE("adaptive quadrature of a Gaussian", "[quadrature]") {
  auto f = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); };
  const auto res = integrate_adaptive(f, -8.0, 8.0, 64, 1e-14, 16, 0.0);
  REQUIRE(res.converged);
  CHECK_THAT(res.value, WithinAbs(std::erf(8.0 / std::sqrt(2.0)), 1e-14));
}

TEST_CASE("adaptive quadrature reports non-convergence", "[quadrature]") {
  auto f = [](double x) { return std::sin(1e4 * x); };
  const auto res = integrate_adaptive(f, 0.0, 1.0, 4, 1e-14, 4, 0.0);
  CHECK_FALSE(res.converged);
}

TEST_CASE("adaptive quadrature does not depend on the thread count", "[quadrature][property]") {
  auto f = [](double x) {
    Eigen::VectorXd v(3);
    v << std::sin(x), std::cos(3.0 * x), std::exp(-x);
    return v;
  };
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  const auto one = integrate_adaptive(f, 0.0, 10.0, 48, 1e-12, 64, zero, 1);
  const auto many = integrate_adaptive(f, 0.0, 10.0, 48, 1e-12, 64, zero, 4);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(one.value(i) == many.value(i));
  }
  CHECK_THAT(one.value(2), WithinRel(1.0 - std::exp(-10.0), 1e-12));
}

TEST_CASE("empty interval integrates to zero", "[quadrature]") {
  auto f = [](double) { return 1.0; };
  const auto res = integrate_adaptive(f, 2.0, 2.0, 8, 1e-12, 8, 0.0);
  CHECK(res.converged);
  CHECK(res.value == 0.0);
}
