#pragma once

// Energy and entropy bookkeeping for a collision, and the per-model report.

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qscat/core.hpp"
#include "qscat/kinetics.hpp"
#include "qscat/spins.hpp"

namespace qscat {

/// Delta E = Tr[H_Y (rho' - rho)].
inline double energy_change(const InternalSystem& system, const Matrix& rho, const Matrix& rho_prime) {
  require_same_dim(static_cast<std::size_t>(rho.rows()), system.dim(), "energy_change");
  require_same_dim(static_cast<std::size_t>(rho_prime.rows()), system.dim(), "energy_change");
  const cplx de = (system.h_y() * (rho_prime - rho)).trace();
  if (std::abs(de.imag()) > 1e-8) {
    throw NumericalError("energy_change: imaginary residue " + std::to_string(de.imag()));
  }
  return de.real();
}

inline double energy_change(const InternalSystem& system, const DensityMatrix& rho,
                            const DensityMatrix& rho_prime) {
  return energy_change(system, rho.matrix(), rho_prime.matrix());
}

/// Delta S = S(rho') - S(rho) in units of k_B.
inline double entropy_change(const DensityMatrix& rho, const DensityMatrix& rho_prime) {
  require_same_dim(rho.dim(), rho_prime.dim(), "entropy_change");
  return von_neumann_entropy(rho_prime) - von_neumann_entropy(rho);
}

/// Named matrix elements of the two-spin state, taken in the storage basis
/// (uu, ud, du, dd), which is also an H_Y eigenbasis for this model.
struct SectorObservables {
  double pop_upup = 0.0;
  double pop_updown = 0.0;
  double pop_downup = 0.0;
  double pop_downdown = 0.0;
  cplx coh_downdown_upup;  ///< <dd|rho|uu>, sector 1
  cplx coh_downup_updown;  ///< <du|rho|ud>, sector 2
};

inline SectorObservables sector_observables(const InternalSystem& system, const Matrix& rho) {
  if (system.dim_a() != 2 || system.dim_b() != 2 || rho.rows() != 4) {
    throw DimensionError("sector_observables: labels need two spin-1/2 subsystems");
  }
  using namespace spin_index;
  auto at = [&](std::size_t r, std::size_t c) {
    return rho(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  };
  SectorObservables o;
  o.pop_upup = at(up_up, up_up).real();
  o.pop_updown = at(up_down, up_down).real();
  o.pop_downup = at(down_up, down_up).real();
  o.pop_downdown = at(down_down, down_down).real();
  o.coh_downdown_upup = at(down_down, up_up);
  o.coh_downup_updown = at(down_up, up_down);
  return o;
}

inline SectorObservables sector_observables(const InternalSystem& system, const DensityMatrix& rho) {
  return sector_observables(system, rho.matrix());
}

struct CollisionReport {
  std::string model;
  Matrix rho_before;
  Matrix rho_after;
  double delta_e = 0.0;
  double delta_ep = 0.0;  ///< kinetic-energy change, -delta_e
  /// Energy change of the time-dependent models, where it is work; NaN otherwise.
  double work = std::numeric_limits<double>::quiet_NaN();
  double delta_s = 0.0;
  std::vector<double> populations;  ///< H_Y eigenbasis
  Matrix coherences;                ///< H_Y eigenbasis, diagonal zeroed
  std::optional<SectorObservables> sectors;
  std::optional<RegimeReport> regime;
  double trace = 1.0;
  double trace_defect = 0.0;
  double hermiticity_defect = 0.0;
  double runtime_ms = 0.0;
  /// Model-specific diagnostics (grid size, propagator defect, ...).
  std::map<std::string, double> extra;
  /// Quality gates that failed; the numbers are still reported.
  std::vector<std::string> quality_failures;
};

/// Fills the thermodynamic fields of a report from the before/after states.
inline CollisionReport make_report(std::string model, const InternalSystem& system,
                                   const DensityMatrix& before, const DensityMatrix& after,
                                   bool is_work = false) {
  CollisionReport r;
  r.model = std::move(model);
  r.rho_before = before.matrix();
  r.rho_after = after.matrix();
  r.delta_e = energy_change(system, before, after);
  r.delta_ep = -r.delta_e;
  if (is_work) {
    r.work = r.delta_e;
  }
  r.delta_s = entropy_change(before, after);
  const Matrix eig = system.to_eigenbasis(after.matrix());
  r.populations.resize(system.dim());
  for (std::size_t j = 0; j < system.dim(); ++j) {
    r.populations[j] = eig(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)).real();
  }
  r.coherences = eig;
  r.coherences.diagonal().setZero();
  r.trace = after.trace();
  r.trace_defect = std::abs(r.trace - 1.0);
  if (system.dim_a() == 2 && system.dim_b() == 2) {
    r.sectors = sector_observables(system, after);
  }
  return r;
}

namespace detail {

inline nlohmann::json complex_json(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back(complex_json(m(r, c)));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json to_json(const RegimeReport& r) {
  return {{"tau_p0", r.tau_p0},       {"cond1", r.cond1},
          {"cond2a", r.cond2a},       {"cond2b", r.cond2b},
          {"cond3a", r.cond3a},       {"cond3b", r.cond3b},
          {"phase_ratio", r.phase_ratio}, {"broad", r.broad},
          {"phase_ok", r.phase_ok},   {"cond1_ok", r.cond1_ok},
          {"cond2_ok", r.cond2_ok},   {"cond3_ok", r.cond3_ok},
          {"all_ok", r.all_ok()},     {"threshold", kMuchLessThreshold}};
}

inline nlohmann::json to_json(const CollisionReport& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["rho_before"] = detail::matrix_json(r.rho_before);
  j["rho_after"] = detail::matrix_json(r.rho_after);
  j["deltaE"] = r.delta_e;
  j["deltaEp"] = r.delta_ep;
  j["work"] = detail::number_or_null(r.work);
  j["deltaS"] = r.delta_s;
  j["populations"] = r.populations;
  j["coherences"] = detail::matrix_json(r.coherences);
  if (r.sectors) {
    const SectorObservables& s = *r.sectors;
    j["sectors"] = {{"pop_upup", s.pop_upup},
                    {"pop_updown", s.pop_updown},
                    {"pop_downup", s.pop_downup},
                    {"pop_downdown", s.pop_downdown},
                    {"coh_downdown_upup", detail::complex_json(s.coh_downdown_upup)},
                    {"coh_downup_updown", detail::complex_json(s.coh_downup_updown)}};
  }
  if (r.regime) {
    j["regime"] = to_json(*r.regime);
  }
  j["diagnostics"] = {{"trace", r.trace},
                      {"trace_defect", r.trace_defect},
                      {"hermiticity_defect", r.hermiticity_defect}};
  j["runtime_ms"] = r.runtime_ms;
  j["extra"] = r.extra;
  j["quality_failures"] = r.quality_failures;
  return j;
}

}  // namespace qscat
