#pragma once

// Config-driven experiments: single collisions, sweeps, regime checks and
// s-matrix dumps. Results are plain data; writing files is left to callers
// except for the CSV/JSON formatters provided here.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qscat/config.hpp"
#include "qscat/core.hpp"
#include "qscat/kinetics.hpp"
#include "qscat/maps.hpp"
#include "qscat/parallel.hpp"
#include "qscat/smatrix.hpp"
#include "qscat/spins.hpp"
#include "qscat/thermo.hpp"

namespace qscat {

/// Quality gates applied to every model run.
inline constexpr double kSMatrixDefectGate = 1e-6;
inline constexpr double kTraceDefectGate = 1e-6;
inline constexpr double kPropagatorDefectGate = 1e-8;

/// One fully resolved parameter point of an experiment.
struct ExperimentPoint {
  InternalSystem system;
  CouplingOperator nu;
  DensityMatrix rho;
  SpatialPotential spatial;
  TemporalPotential temporal;
  KineticState kinetic;
  double lambda;
};

namespace detail {

inline InternalSystem build_system(const SystemSpec& s, CouplingOperator* nu_out) {
  if (s.kind == SystemSpec::Kind::two_spin) {
    TwoSpinModel m = build_two_spin(s.two_spin);
    *nu_out = m.nu;
    return m.system;
  }
  *nu_out = CouplingOperator(s.nu);
  return InternalSystem(s.h_a, s.h_b);
}

inline DensityMatrix build_state(const StateSpec& s, const InternalSystem& system) {
  switch (s.kind) {
    case StateSpec::Kind::two_spin_pure:
      return tensor_factorize(system, qubit_pure_state(s.pop_a, s.phase_a),
                              qubit_pure_state(s.pop_b, s.phase_b));
    case StateSpec::Kind::product:
      return tensor_factorize(system, DensityMatrix(s.rho_a), DensityMatrix(s.rho_b));
    case StateSpec::Kind::maximally_mixed:
      return DensityMatrix::maximally_mixed(system.dim());
  }
  throw InvalidArgument("unknown initial state kind");
}

}  // namespace detail

/// Builds the physical objects for one sweep point. Any violated physical
/// precondition is reported as a ConfigError naming the offending block.
inline ExperimentPoint resolve_point(const ExperimentConfig& c,
                                     std::optional<double> lambda_override = std::nullopt,
                                     std::optional<double> sigma_x_override = std::nullopt) {
  const char* stage = "system";
  try {
    CouplingOperator nu(Matrix::Zero(1, 1));
    InternalSystem system = detail::build_system(c.system, &nu);
    require_same_dim(nu.dim(), system.dim(), "system.nu");
    stage = "initial_state";
    DensityMatrix rho = detail::build_state(c.state, system);

    stage = "interaction";
    const InteractionSpec& in = c.interaction;
    const double lambda = lambda_override ? *lambda_override
                                          : (in.lambda ? *in.lambda : *in.v0 * in.tau / kHbar);
    const double v0 = lambda * kHbar / in.tau;
    SpatialPotential spatial = SpatialPotential::sinusoidal(in.a, v0);
    if (in.spatial_kind == SpatialPotential::Kind::square) {
      spatial = SpatialPotential::square(in.a, v0);
    } else if (in.spatial_kind == SpatialPotential::Kind::sampled) {
      spatial = SpatialPotential::sampled(in.a, in.spatial_samples).with_mean(v0);
    }
    TemporalPotential temporal = TemporalPotential::triangular(in.tau, v0);
    if (in.temporal_kind == TemporalPotential::Kind::square) {
      temporal = TemporalPotential::square(in.tau, v0);
    } else if (in.temporal_kind == TemporalPotential::Kind::sampled) {
      temporal = TemporalPotential::sampled(in.tau, in.temporal_samples).with_mean(v0);
    }

    stage = "kinetic";
    const KineticSpec& k = c.kinetic;
    const double p0 = k.p0 ? *k.p0 : k.mass * in.a / in.tau;
    double sigma_p = 0.0;
    if (k.sigma_p) {
      sigma_p = *k.sigma_p;
    } else {
      sigma_p = 100.0 * k.mass * system.span() / p0;
      if (!(sigma_p > 0.0)) {
        throw InvalidArgument("sigma_p must be given when Delta_Y = 0");
      }
    }
    const std::optional<double> sigma_x = sigma_x_override ? sigma_x_override : k.sigma_x;
    KineticState kinetic = sigma_x ? KineticState::gaussian_mixed(p0, k.x0, sigma_p, *sigma_x, k.mass)
                                   : KineticState::gaussian_pure(p0, k.x0, sigma_p, k.mass);
    return ExperimentPoint{std::move(system), std::move(nu),       std::move(rho),
                           std::move(spatial), std::move(temporal), std::move(kinetic),
                           lambda};
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(c.source + ": " + stage + ": " + e.what());
  }
}

/// Shares exact s-matrix solvers (and their energy caches) between runs that
/// use the same spatial potential strength.
class SolverCache {
 public:
  SolverCache(double ode_tol) : ode_tol_(ode_tol) {}

  std::shared_ptr<const SMatrixSolver> get(const ExperimentPoint& pt) {
    std::lock_guard<std::mutex> lock(mutex_);
    const double key = pt.spatial.mean();
    auto it = solvers_.find(key);
    if (it == solvers_.end()) {
      SolveOptions so;
      so.ode_tol = ode_tol_;
      so.mass = pt.kinetic.mass();
      it = solvers_
               .emplace(key, std::make_shared<const SMatrixSolver>(pt.system, pt.nu, pt.spatial, so))
               .first;
    }
    return it->second;
  }

 private:
  double ode_tol_;
  std::mutex mutex_;
  std::map<double, std::shared_ptr<const SMatrixSolver>> solvers_;
};

/// Runs one model at one point.
inline CollisionReport run_model(const ExperimentPoint& pt, Model model, const QuadratureSpec& quad,
                                 double ode_tol, SolverCache& solvers) {
  const auto start = std::chrono::steady_clock::now();
  CollisionReport report;
  switch (model) {
    case Model::exact_sm: {
      const auto solver = solvers.get(pt);
      const MapTensor tensor = scattering_map_tensor(*solver, pt.kinetic, quad);
      const MappedState mapped = apply_map(pt.system, tensor, pt.rho);
      report = make_report(to_string(model), pt.system, pt.rho, mapped.rho);
      report.trace_defect = mapped.trace_defect;
      report.hermiticity_defect = mapped.hermiticity_defect;
      const CptpReport cptp = cptp_check(tensor);
      report.extra = {{"grid_points", static_cast<double>(tensor.info.grid_points)},
                      {"panels", static_cast<double>(tensor.info.max_panels_used)},
                      {"quadrature_change", tensor.info.max_change},
                      {"smatrix_defect", tensor.info.max_smatrix_defect},
                      {"tensor_trace_defect", cptp.trace_defect},
                      {"tensor_hermiticity_defect", cptp.hermiticity_defect},
                      {"min_choi_eigenvalue", cptp.min_choi_eig}};
      if (tensor.info.max_smatrix_defect > kSMatrixDefectGate) {
        report.quality_failures.push_back("s-matrix unitarity defect " +
                                          std::to_string(tensor.info.max_smatrix_defect));
      }
      if (mapped.trace_defect > kTraceDefectGate) {
        report.quality_failures.push_back("trace defect " + std::to_string(mapped.trace_defect));
      }
      break;
    }
    case Model::random_unitary: {
      const DensityMatrix out = random_unitary_map(pt.system, pt.nu, pt.spatial, pt.kinetic, pt.rho, quad);
      report = make_report(to_string(model), pt.system, pt.rho, out);
      break;
    }
    case Model::semiclassical: {
      const DensityMatrix out = semiclassical_collision(pt.system, pt.nu, pt.spatial.mean(),
                                                        pt.kinetic.p0(), pt.spatial.a(), pt.rho,
                                                        pt.kinetic.mass());
      report = make_report(to_string(model), pt.system, pt.rho, out);
      break;
    }
    case Model::time_dependent: {
      const TimeDependentResult td = time_dependent_evolve(pt.system, pt.nu, pt.temporal, pt.rho, ode_tol);
      report = make_report(to_string(model), pt.system, pt.rho, td.rho, true);
      report.extra = {{"propagator_defect", td.propagator.unitarity_defect},
                      {"ode_steps", static_cast<double>(td.propagator.steps)}};
      if (td.propagator.unitarity_defect > kPropagatorDefectGate) {
        report.quality_failures.push_back("propagator unitarity defect " +
                                          std::to_string(td.propagator.unitarity_defect));
      }
      break;
    }
    case Model::magnus1: {
      const Matrix u = magnus_first_order(pt.nu, pt.temporal);
      Matrix out = u * pt.rho.matrix() * u.adjoint();
      out = hermitian_part(out);
      report = make_report(to_string(model), pt.system, pt.rho, DensityMatrix(std::move(out)), true);
      report.extra = {{"omega2_norm", magnus_second_order_norm(pt.system, pt.nu, pt.temporal)}};
      break;
    }
  }
  report.regime = classify_regime(pt.kinetic, pt.system, pt.spatial);
  report.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Every requested model at the configured point.
inline std::vector<CollisionReport> run_single(const ExperimentConfig& c) {
  const ExperimentPoint pt = resolve_point(c);
  SolverCache solvers(c.ode_tol);
  std::vector<CollisionReport> out;
  for (Model m : c.models) {
    out.push_back(run_model(pt, m, c.quadrature, c.ode_tol, solvers));
  }
  return out;
}

inline nlohmann::json point_json(const ExperimentPoint& pt) {
  return {{"lambda", pt.lambda},
          {"v0", pt.spatial.v0()},
          {"tau", pt.temporal.tau()},
          {"a", pt.spatial.a()},
          {"p0", pt.kinetic.p0()},
          {"x0", pt.kinetic.x0()},
          {"sigma_p", pt.kinetic.sigma_p()},
          {"sigma_x", pt.kinetic.sigma_x()},
          {"purity", pt.kinetic.purity()},
          {"mass", pt.kinetic.mass()},
          {"delta_y", pt.system.span()}};
}

inline nlohmann::json collide_json(const ExperimentConfig& c, const std::vector<CollisionReport>& reports) {
  nlohmann::json j;
  j["schema_version"] = c.schema_version;
  j["config"] = c.source;
  j["point"] = point_json(resolve_point(c));
  j["reports"] = nlohmann::json::array();
  for (const CollisionReport& r : reports) {
    j["reports"].push_back(to_json(r));
  }
  return j;
}

/// Regime diagnostics at the configured point.
inline nlohmann::json check_regime(const ExperimentConfig& c) {
  const ExperimentPoint pt = resolve_point(c);
  nlohmann::json j;
  j["schema_version"] = c.schema_version;
  j["config"] = c.source;
  j["point"] = point_json(pt);
  j["regime"] = to_json(classify_regime(pt.kinetic, pt.system, pt.spatial));
  return j;
}

struct SweepRow {
  SweepVariable variable = SweepVariable::none;
  double value = 0.0;
  Model model = Model::semiclassical;
  std::optional<CollisionReport> report;
  std::string error;
  bool numerical_failure = false;
};

/// One row per (value, model) in value-major, model-minor order. Values are
/// processed concurrently on `threads` workers; a failing point yields rows
/// with the error column set and does not stop the sweep.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& c, unsigned threads = 1) {
  if (c.sweep.variable == SweepVariable::none) {
    throw ConfigError(c.source + ": sweep: missing sweep block");
  }
  const std::vector<double>& values = c.sweep.values;
  const std::size_t n_models = c.models.size();
  // Resolve every point first so configuration errors surface before any work.
  std::vector<std::optional<ExperimentPoint>> points(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (c.sweep.variable == SweepVariable::lambda) {
      points[i] = resolve_point(c, values[i], std::nullopt);
    } else {
      points[i] = resolve_point(c, std::nullopt, values[i]);
    }
  }
  QuadratureSpec quad = c.quadrature;
  quad.threads = values.size() > 1 ? 1u : threads;
  SolverCache solvers(c.ode_tol);
  std::vector<SweepRow> rows(values.size() * n_models);
  parallel_for(values.size(), threads, [&](std::size_t i) {
    for (std::size_t m = 0; m < n_models; ++m) {
      SweepRow& row = rows[i * n_models + m];
      row.variable = c.sweep.variable;
      row.value = values[i];
      row.model = c.models[m];
      try {
        row.report = run_model(*points[i], c.models[m], quad, c.ode_tol, solvers);
        if (!row.report->quality_failures.empty()) {
          row.numerical_failure = true;
          row.error = row.report->quality_failures.front();
        }
      } catch (const Error& e) {
        row.error = e.what();
        row.numerical_failure = true;
      }
    }
  });
  return rows;
}

namespace detail {

// Shortest round-trip representation; identical inputs give identical text.
inline std::string format_number(double x) {
  if (std::isnan(x)) {
    return "";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char ch : s) {
    out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  }
  return out + "\"";
}

}  // namespace detail

inline constexpr const char* kSweepCsvHeader =
    "sweep_var,value,model,pop_upup,re_coh,im_coh,deltaE,deltaS,work,trace_defect,runtime_ms,error";

/// CSV with the documented column set. pop_upup is rho'(0, 0) and coh is
/// rho'(N-1, 0) in the storage basis; for the two-spin model these are
/// <uu|rho'|uu> and <dd|rho'|uu>.
inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  using detail::format_number;
  std::ostringstream os;
  os << kSweepCsvHeader << '\n';
  for (const SweepRow& row : rows) {
    os << to_string(row.variable) << ',' << format_number(row.value) << ',' << to_string(row.model)
       << ',';
    if (row.report) {
      const CollisionReport& r = *row.report;
      const Eigen::Index last = r.rho_after.rows() - 1;
      const cplx coh = r.rho_after(last, 0);
      os << format_number(r.rho_after(0, 0).real()) << ',' << format_number(coh.real()) << ','
         << format_number(coh.imag()) << ',' << format_number(r.delta_e) << ','
         << format_number(r.delta_s) << ',' << format_number(r.work) << ','
         << format_number(r.trace_defect) << ',';
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.3f", r.runtime_ms);
      os << buf;
    } else {
      os << ",,,,,,,";
    }
    os << ',' << detail::csv_quote(row.error) << '\n';
  }
  return os.str();
}

struct SMatrixDump {
  std::vector<std::shared_ptr<const SMatrixAtE>> solutions;
};

/// Exact s(E) on a uniform grid of total energies. The default range covers
/// the kinetic window p0 +- n_sigma sigma_p for incidence in the top channel.
inline SMatrixDump dump_smatrix(const ExperimentConfig& c, unsigned threads = 1) {
  const ExperimentPoint pt = resolve_point(c);
  const double m = pt.kinetic.mass();
  const double p_lo = std::max(pt.kinetic.p0() - c.quadrature.n_sigma * pt.kinetic.sigma_p(), 0.0);
  const double p_hi = pt.kinetic.p0() + c.quadrature.n_sigma * pt.kinetic.sigma_p();
  const double e_top = pt.system.energies().maxCoeff();
  const double e_min = c.smatrix_dump.e_min ? *c.smatrix_dump.e_min : p_lo * p_lo / (2.0 * m) + e_top;
  const double e_max = c.smatrix_dump.e_max ? *c.smatrix_dump.e_max : p_hi * p_hi / (2.0 * m) + e_top;
  if (e_max < e_min) {
    throw ConfigError(c.source + ": smatrix_dump: e_max must not be below e_min");
  }
  const std::size_t n = c.smatrix_dump.points;
  SolveOptions so;
  so.ode_tol = c.ode_tol;
  so.mass = m;
  const SMatrixSolver solver(pt.system, pt.nu, pt.spatial, so);
  SMatrixDump out;
  out.solutions.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const double e = n == 1 ? e_min : e_min + (e_max - e_min) * static_cast<double>(i) / static_cast<double>(n - 1);
    out.solutions[i] = solver.at(e);
  });
  return out;
}

inline constexpr const char* kSMatrixCsvHeader = "energy,defect,block,j_out,j_in,re,im";

inline std::string smatrix_csv(const SMatrixDump& dump) {
  using detail::format_number;
  std::ostringstream os;
  os << kSMatrixCsvHeader << '\n';
  for (const auto& s : dump.solutions) {
    const std::pair<const char*, const Matrix*> blocks[] = {
        {"t", &s->t}, {"r", &s->r}, {"t_bar", &s->t_bar}, {"r_bar", &s->r_bar}};
    for (const auto& [name, mat] : blocks) {
      if (mat->size() == 0) {
        continue;
      }
      for (Eigen::Index jo = 0; jo < mat->rows(); ++jo) {
        for (Eigen::Index ji = 0; ji < mat->cols(); ++ji) {
          const cplx z = (*mat)(jo, ji);
          os << format_number(s->energy) << ',' << format_number(s->defect) << ',' << name << ','
             << jo << ',' << ji << ',' << format_number(z.real()) << ',' << format_number(z.imag())
             << '\n';
        }
      }
    }
  }
  return os.str();
}

}  // namespace qscat
