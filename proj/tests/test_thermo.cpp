#include <cmath>

#include "catch_amalgamated.hpp"

#include "qscat/maps.hpp"
#include "qscat/spins.hpp"
#include "qscat/thermo.hpp"

using namespace qscat;
using Catch::Matchers::WithinAbs;

TEST_CASE("energy and entropy change of a dephasing step", "[thermo]") {
  const TwoSpinModel m = build_two_spin({});
  const DensityMatrix rho = reference_initial_state();
  Matrix diag = rho.matrix();
  diag = Matrix(diag.diagonal().asDiagonal());
  const DensityMatrix dephased(diag);
  CHECK_THAT(energy_change(m.system, rho, dephased), WithinAbs(0.0, 1e-15));
  // Fully dephased product of diag(0.1, 0.9) and diag(0.5, 0.5).
  const double expected = -(0.1 * std::log(0.1) + 0.9 * std::log(0.9)) + std::log(2.0);
  CHECK_THAT(entropy_change(rho, dephased), WithinAbs(expected, 1e-10));
}

TEST_CASE("report fields for a unitary collision", "[thermo]") {
  const TwoSpinModel m = build_two_spin({});
  const DensityMatrix rho = reference_initial_state();
  const Matrix u = analytic_unitary(1.3, 0.8, 0.2);
  const DensityMatrix out(u * rho.matrix() * u.adjoint());
  const CollisionReport r = make_report("semiclassical", m.system, rho, out);
  CHECK(std::isnan(r.work));
  CHECK_THAT(r.delta_ep, WithinAbs(-r.delta_e, 0.0));
  CHECK_THAT(r.delta_s, WithinAbs(0.0, 1e-10));
  CHECK_THAT(r.trace_defect, WithinAbs(0.0, 1e-14));
  double pop_sum = 0.0;
  for (double p : r.populations) {
    pop_sum += p;
  }
  CHECK_THAT(pop_sum, WithinAbs(1.0, 1e-14));
  REQUIRE(r.sectors);
  const Matrix& a = out.matrix();
  CHECK(r.sectors->pop_upup == a(spin_index::up_up, spin_index::up_up).real());
  CHECK(r.sectors->coh_downdown_upup == a(spin_index::down_down, spin_index::up_up));
  // Energy change from the eigenbasis populations.
  double de = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    const double before = m.system.to_eigenbasis(rho.matrix())(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)).real();
    de += m.system.energy(j) * (r.populations[j] - before);
  }
  CHECK_THAT(r.delta_e, WithinAbs(de, 1e-13));

  const CollisionReport w = make_report("time_dependent", m.system, rho, out, true);
  CHECK(w.work == w.delta_e);
}

TEST_CASE("report JSON layout", "[thermo]") {
  const TwoSpinModel m = build_two_spin({});
  const DensityMatrix rho = reference_initial_state();
  CollisionReport r = make_report("exact_sm", m.system, rho, rho);
  r.extra["grid_points"] = 12.0;
  const nlohmann::json j = to_json(r);
  CHECK(j["model"] == "exact_sm");
  CHECK(j["work"].is_null());
  CHECK(j["rho_after"].size() == 4);
  CHECK(j["rho_after"][0][0].size() == 2);
  CHECK(j["sectors"]["pop_upup"].get<double>() == r.sectors->pop_upup);
  CHECK(j["extra"]["grid_points"].get<double>() == 12.0);
  CHECK(j["diagnostics"].contains("trace_defect"));
}

TEST_CASE("sector labels need two qubits", "[thermo]") {
  const InternalSystem sys(Matrix::Identity(3, 3), Matrix::Identity(2, 2));
  CHECK_THROWS_AS(sector_observables(sys, Matrix::Identity(6, 6) / 6.0), DimensionError);
  const DensityMatrix rho = DensityMatrix::maximally_mixed(6);
  CHECK_FALSE(make_report("x", sys, rho, rho).sectors);
}
