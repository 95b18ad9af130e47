#include <cmath>

#include "catch_amalgamated.hpp"

#include "qscat/smatrix.hpp"
#include "qscat/spins.hpp"

using namespace qscat;
using Catch::Matchers::WithinAbs;

namespace {

InternalSystem single_channel() { return InternalSystem(Matrix::Zero(1, 1), Matrix::Zero(1, 1)); }
CouplingOperator unit_coupling() { return CouplingOperator(Matrix::Identity(1, 1)); }

// |t|^2 for a rectangular barrier of height v0 on a width a, E > v0 (m = hbar = 1).
double barrier_transmission(double e, double v0, double a) {
  const double q = std::sqrt(2.0 * (e - v0));
  const double s = std::sin(q * a);
  return 1.0 / (1.0 + v0 * v0 * s * s / (4.0 * e * (e - v0)));
}

}  // namespace

TEST_CASE("rectangular barrier matches the closed form", "[smatrix]") {
  const double v0 = 2.0;
  const double a = 3.0;
  const SpatialPotential barrier = SpatialPotential::square(a, v0);
  for (double ratio : {1.2, 1.7, 3.0, 6.5, 10.0}) {
    const double e = ratio * v0;
    const SMatrixAtE s = solve_multichannel(single_channel(), unit_coupling(), barrier, e);
    CHECK_THAT(std::norm(s.t(0, 0)), WithinAbs(barrier_transmission(e, v0, a), 1e-8));
    CHECK(s.defect < 1e-7);
  }
}

TEST_CASE("zero potential transmits without phase", "[smatrix]") {
  const TwoSpinModel m = build_two_spin({});
  const SMatrixAtE s = solve_multichannel(m.system, m.nu, SpatialPotential::sinusoidal(3.5, 0.0), 50.0);
  CHECK(max_abs(s.t - Matrix::Identity(4, 4)) < 1e-14);
  CHECK(max_abs(s.r) < 1e-14);
}

TEST_CASE("multichannel s-matrix is unitary and reciprocal", "[smatrix]") {
  const TwoSpinModel m = build_two_spin({});
  const SpatialPotential v = SpatialPotential::sinusoidal(3.5, 1.0 / 0.25);
  for (double p : {12.0, 14.0, 16.0}) {
    const double e = 0.5 * p * p + m.system.energies().maxCoeff();
    const SMatrixAtE s = solve_multichannel(m.system, m.nu, v, e);
    CHECK(s.defect < 1e-8);
    CHECK_FALSE(s.flagged);
    // Real coupling and real potential: time-reversal symmetry makes S symmetric.
    CHECK(max_abs(s.full() - s.full().transpose()) < 1e-8);
  }
}

TEST_CASE("asymmetric potential obeys reciprocity between the two incidences", "[smatrix]") {
  const TwoSpinModel m = build_two_spin({});
  const SpatialPotential v = SpatialPotential::sampled(3.5, {0.0, 3.0, 8.0, 5.0, 1.0, 0.0});
  REQUIRE_FALSE(v.symmetric());
  const SMatrixAtE s = solve_multichannel(m.system, m.nu, v, 60.0);
  CHECK(s.defect < 1e-8);
  CHECK(max_abs(s.t_bar - s.t.transpose()) < 1e-8);
  CHECK(max_abs(s.r - s.r.transpose()) < 1e-8);
  CHECK(max_abs(s.r_bar - s.r_bar.transpose()) < 1e-8);
  CHECK(max_abs(s.r - s.r_bar) > 1e-4);
}

TEST_CASE("high-energy s-matrix approaches the semiclassical limit", "[smatrix]") {
  const TwoSpinModel m = build_two_spin({});
  const double tau = 2.5e-3;
  const double p0 = 3.5 / tau;
  const SpatialPotential v = SpatialPotential::sinusoidal(3.5, 2.0 / tau);
  const double e = 0.5 * p0 * p0 + m.system.energies().maxCoeff();
  const SMatrixAtE exact = solve_multichannel(m.system, m.nu, v, e);
  const SMatrixAtE semi = semiclassical_smatrix(m.system, m.nu, v, p0);
  CHECK(exact.defect < 1e-6);
  CHECK(max_abs(exact.r) < 1e-3);
  // Diagonal phases differ by the kinetic phase exp(i (p_j - p0) a); compare moduli.
  CHECK(max_abs(Matrix(exact.t.cwiseAbs().cast<cplx>() - semi.t.cwiseAbs().cast<cplx>())) < 1e-2);
}

TEST_CASE("closed channels are rejected", "[smatrix]") {
  const TwoSpinModel m = build_two_spin({});
  CHECK_THROWS_AS(open_channel_momenta(m.system, 1.0), NumericalError);
  CHECK_NOTHROW(open_channel_momenta(m.system, 1.5));
}

TEST_CASE("solver memoises energies", "[smatrix]") {
  const TwoSpinModel m = build_two_spin({});
  const SMatrixSolver solver(m.system, m.nu, SpatialPotential::sinusoidal(3.5, 4.0));
  const auto a = solver.at(100.0);
  const auto b = solver.at(100.0 * (1.0 + 1e-15));
  CHECK(a.get() == b.get());
  CHECK(solver.solves() == 1);
  CHECK(solver.max_defect() == a->defect);
}

TEST_CASE("interpolated grid agrees with direct solves", "[smatrix]") {
  const TwoSpinModel m = build_two_spin({});
  const SMatrixSolver solver(m.system, m.nu, SpatialPotential::sinusoidal(3.5, 4.0));
  const double e_lo = 0.5 * 12.0 * 12.0 + 1.25;
  const double e_hi = 0.5 * 16.0 * 16.0 + 1.25;
  const std::size_t points = recommended_grid_points(e_lo, e_hi, 12.0 - 2.0, 3.5, 1.0, 64, 0.1);
  const SMatrixGrid grid(solver, e_lo, e_hi, points, 2);
  for (double e : {e_lo + 0.37, 0.5 * (e_lo + e_hi) + 0.011, e_hi - 0.29}) {
    const SMatrixAtE direct = *solver.at(e);
    const SMatrixAtE interp = grid.interpolate(e);
    CHECK(max_abs(direct.t - interp.t) < 1e-6);
    CHECK(max_abs(direct.r - interp.r) < 1e-6);
  }
}
