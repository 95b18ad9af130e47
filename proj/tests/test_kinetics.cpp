#include <cmath>

#include "catch_amalgamated.hpp"

#include "qscat/kinetics.hpp"
#include "qscat/quadrature.hpp"

using namespace qscat;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// int dp dx f(p, x) by product Gauss-Legendre over +-n widths.
template <class F>
double integrate_2d(F f, double p0, double sp, double x0, double sx, double n = 9.0) {
  auto outer = [&](double p) {
    auto inner = [&](double x) { return f(p, x); };
    return integrate_adaptive(inner, x0 - n * sx, x0 + n * sx, 64, 1e-13, 16, 0.0).value;
  };
  return integrate_adaptive(outer, p0 - n * sp, p0 + n * sp, 64, 1e-13, 16, 0.0).value;
}

}  // namespace

TEST_CASE("Wigner function is normalised and has the right marginal", "[kinetics]") {
  const KineticState s = KineticState::gaussian_mixed(14.0, 0.3, 1.0, 2.0);
  CHECK_THAT(integrate_2d([&](double p, double x) { return s.wigner(p, x); }, 14.0, 1.0, 0.3, 2.0),
             WithinAbs(1.0, 1e-12));
  for (double p : {12.0, 14.0, 15.5}) {
    auto f = [&](double x) { return s.wigner(p, x); };
    const double marginal = integrate_adaptive(f, -20.0, 20.0, 64, 1e-14, 16, 0.0).value;
    CHECK_THAT(marginal, WithinRel(s.momentum_density(p), 1e-11));
  }
}

TEST_CASE("purity from the Wigner function", "[kinetics]") {
  for (double sx : {0.5, 2.0, 7.0}) {
    const KineticState s = KineticState::gaussian_mixed(0.0, 0.0, 1.0, sx);
    const double numeric =
        2.0 * kPi * kHbar * integrate_2d([&](double p, double x) { return std::pow(s.wigner(p, x), 2); },
                                         0.0, 1.0, 0.0, sx);
    CHECK_THAT(numeric, WithinRel(s.purity(), 1e-10));
    CHECK_THAT(s.purity(), WithinRel(0.5 / sx, 1e-14));
  }
}

TEST_CASE("pure Gaussian density matrix factorises", "[kinetics]") {
  const KineticState s = KineticState::gaussian_pure(10.0, -1.5, 0.7);
  CHECK_THAT(s.sigma_x(), WithinRel(0.5 / 0.7, 1e-14));
  CHECK_THAT(s.purity(), WithinRel(1.0, 1e-14));
  const KineticState mixed_at_limit = KineticState::gaussian_mixed(10.0, -1.5, 0.7, 0.5 / 0.7);
  for (double p : {9.0, 10.2}) {
    for (double pp : {9.5, 11.0}) {
      const cplx expected = s.wave_function(p) * std::conj(s.wave_function(pp));
      CHECK(std::abs(s.rho(p, pp) - expected) < 1e-14);
      CHECK(std::abs(mixed_at_limit.rho(p, pp) - expected) < 1e-13);
    }
  }
  CHECK_THAT(std::norm(s.wave_function(10.3)), WithinRel(s.momentum_density(10.3), 1e-13));
}

TEST_CASE("translation only changes the phase of coherences", "[kinetics]") {
  const KineticState s = KineticState::gaussian_mixed(5.0, 0.0, 1.0, 3.0);
  const KineticState t = s.translated_to(2.0);
  CHECK(t.x0() == 2.0);
  CHECK_THAT(std::abs(t.rho(4.5, 5.5)), WithinRel(std::abs(s.rho(4.5, 5.5)), 1e-14));
  CHECK(std::abs(t.rho(4.5, 5.5) - s.rho(4.5, 5.5) * std::exp(cplx(0.0, 2.0))) < 1e-14);
}

TEST_CASE("uncertainty relation is enforced", "[kinetics]") {
  CHECK_THROWS_AS(KineticState::gaussian_mixed(1.0, 0.0, 1.0, 0.49), InvalidArgument);
  CHECK_THROWS_AS(KineticState::gaussian_pure(1.0, 0.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(KineticState::gaussian_pure(1.0, 0.0, 1.0, -1.0), InvalidArgument);
}

TEST_CASE("regime ratios for the fast and slow collisions", "[kinetics]") {
  Matrix ha = Matrix::Zero(2, 2);
  ha(0, 0) = 0.75;
  ha(1, 1) = -0.75;
  Matrix hb = Matrix::Zero(2, 2);
  hb(0, 0) = 0.5;
  hb(1, 1) = -0.5;
  const InternalSystem sys(ha, hb);
  REQUIRE_THAT(sys.span(), WithinRel(2.5, 1e-14));

  const double tau_fast = 2.5e-3;
  const double p0_fast = 3.5 / tau_fast;
  const KineticState fast = KineticState::gaussian_pure(p0_fast, 0.0, 100.0 * 2.5 / p0_fast);
  const RegimeReport rf = classify_regime(fast, sys, SpatialPotential::sinusoidal(3.5, 1.0 / tau_fast));
  CHECK_THAT(rf.tau_p0, WithinRel(tau_fast, 1e-12));
  CHECK_THAT(rf.cond1, WithinRel(tau_fast * 2.5, 1e-12));
  CHECK_THAT(rf.cond3b, WithinRel(0.01, 1e-10));
  CHECK(rf.all_ok());

  const KineticState slow = KineticState::gaussian_pure(14.0, 0.0, 1.0);
  const RegimeReport rs = classify_regime(slow, sys, SpatialPotential::sinusoidal(3.5, 4.0));
  CHECK_THAT(rs.cond1, WithinRel(0.625, 1e-12));
  CHECK_FALSE(rs.cond1_ok);
  CHECK_FALSE(rs.all_ok());

  const KineticState far = KineticState::gaussian_pure(p0_fast, 1e3, 1.0);
  const RegimeReport rp = classify_regime(far, sys, SpatialPotential::sinusoidal(3.5, 1.0));
  CHECK_FALSE(rp.phase_ok);
}

TEST_CASE("momentum distribution is normalised", "[kinetics]") {
  for (const KineticState& s : {KineticState::gaussian_pure(1400.0, 0.0, 0.179),
                                KineticState::gaussian_mixed(14.0, 2.0, 1.0, 5000.0)}) {
    auto f = [&s](double p) { return s.rho(p, p).real(); };
    const double lo = s.p0() - 10.0 * s.sigma_p();
    const double hi = s.p0() + 10.0 * s.sigma_p();
    CHECK_THAT(integrate_adaptive(f, lo, hi, 64, 1e-13, 16, 0.0).value, WithinAbs(1.0, 1e-8));
  }
}
