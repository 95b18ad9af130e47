#pragma once

// Experiment configuration: a YAML document with a `schema_version` field.
// Every error message is anchored to a file position (or to the --set
// override that introduced the value).
//
//   schema_version: 1
//   system:       {kind: two_spin, delta_a, delta_b, jx, jy}
//                 {kind: matrices, h_a, h_b, nu}   entries: x or [re, im]
//   initial_state: {kind: two_spin_pure, pop_a, pop_b, phase_a, phase_b}
//                  {kind: product, rho_a, rho_b} | {kind: maximally_mixed}
//   interaction:  {tau, lambda | v0,
//                  spatial: {kind: sinusoidal|square|sampled, a, samples},
//                  temporal: {kind: triangular|square|sampled, samples}}
//   kinetic:      {mass, p0, x0, sigma_p, sigma_x}
//   models:       [exact_sm, random_unitary, semiclassical, time_dependent, magnus1]
//   sweep:        {variable: lambda|sigma_x, values: [..] | {start, stop, count}}
//   quadrature:   {nodes, n_sigma, tol, smatrix_mode: grid|exact, max_panels,
//                  grid_min_points, grid_phase_step}
//   ode:          {tol}
//   output:       {dir, csv, json}
//   smatrix_dump: {e_min, e_max, points}

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "qscat/core.hpp"
#include "qscat/maps.hpp"
#include "qscat/spins.hpp"

namespace qscat {

inline constexpr int kSchemaVersion = 1;

enum class Model { exact_sm, random_unitary, semiclassical, time_dependent, magnus1 };

inline std::string to_string(Model m) {
  switch (m) {
    case Model::exact_sm:
      return "exact_sm";
    case Model::random_unitary:
      return "random_unitary";
    case Model::semiclassical:
      return "semiclassical";
    case Model::time_dependent:
      return "time_dependent";
    case Model::magnus1:
      return "magnus1";
  }
  return "?";
}

enum class SweepVariable { none, lambda, sigma_x };

inline std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::none:
      return "none";
    case SweepVariable::lambda:
      return "lambda";
    case SweepVariable::sigma_x:
      return "sigma_x";
  }
  return "?";
}

struct SystemSpec {
  enum class Kind { two_spin, matrices } kind = Kind::two_spin;
  TwoSpinParams two_spin;
  Matrix h_a, h_b, nu;
};

struct StateSpec {
  enum class Kind { two_spin_pure, product, maximally_mixed } kind = Kind::two_spin_pure;
  double pop_a = 0.1;
  double pop_b = 0.5;
  double phase_a = kPi / 4.0;
  double phase_b = kPi / 4.0;
  Matrix rho_a, rho_b;
};

struct InteractionSpec {
  double tau = 0.0;
  /// Exactly one of lambda / v0 is set after parsing; lambda = v0 tau / hbar.
  std::optional<double> lambda;
  std::optional<double> v0;
  SpatialPotential::Kind spatial_kind = SpatialPotential::Kind::sinusoidal;
  double a = 3.5;
  std::vector<double> spatial_samples;
  TemporalPotential::Kind temporal_kind = TemporalPotential::Kind::triangular;
  std::vector<double> temporal_samples;
};

struct KineticSpec {
  double mass = 1.0;
  std::optional<double> p0;
  double x0 = 0.0;
  std::optional<double> sigma_p;
  std::optional<double> sigma_x;
};

struct SweepSpec {
  SweepVariable variable = SweepVariable::none;
  std::vector<double> values;
};

struct OutputSpec {
  std::string dir = "out";
  std::string csv = "sweep.csv";
  std::string json = "collide.json";
};

struct SMatrixDumpSpec {
  std::optional<double> e_min;
  std::optional<double> e_max;
  std::size_t points = 64;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string source = "<config>";
  SystemSpec system;
  StateSpec state;
  InteractionSpec interaction;
  KineticSpec kinetic;
  std::vector<Model> models;
  SweepSpec sweep;
  QuadratureSpec quadrature;
  double ode_tol = 1e-10;
  OutputSpec output;
  SMatrixDumpSpec smatrix_dump;
};

namespace detail {

// A YAML node together with its dotted path, used for anchored messages.
// Missing children keep their parent's node as the position anchor.
class ConfigNode {
 public:
  ConfigNode(YAML::Node node, std::string path, const std::string* source,
             const std::set<std::string>* overridden)
      : node_(std::move(node)), anchor_(node_), path_(std::move(path)), source_(source),
        overridden_(overridden) {}

  const YAML::Node& yaml() const { return node_; }
  const std::string& path() const { return path_; }
  bool present() const { return node_.IsDefined() && !node_.IsNull(); }

  std::string where() const {
    for (std::string p = path_; !p.empty();) {
      if (overridden_->count(p) != 0) {
        return "--set " + p;
      }
      const auto dot = p.rfind('.');
      p = dot == std::string::npos ? std::string() : p.substr(0, dot);
    }
    const YAML::Mark mark = anchor_.IsDefined() ? anchor_.Mark() : YAML::Mark::null_mark();
    std::ostringstream os;
    os << *source_;
    if (!mark.is_null()) {
      os << ':' << mark.line + 1 << ':' << mark.column + 1;
    }
    return os.str();
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(where() + ": " + (path_.empty() ? "" : path_ + ": ") + what);
  }

  ConfigNode child(const std::string& key) const {
    if (present() && !node_.IsMap()) {
      fail("expected a mapping");
    }
    const std::string p = path_.empty() ? key : path_ + "." + key;
    ConfigNode c = *this;
    c.path_ = p;
    // YAML::Node assignment writes through to the document; rebind with reset().
    const YAML::Node& self = node_;
    // A missing key yields an invalid node that throws on use; map it to Undefined.
    const YAML::Node found = present() ? self[key] : YAML::Node(YAML::NodeType::Undefined);
    c.node_.reset(found.IsDefined() ? found : YAML::Node(YAML::NodeType::Undefined));
    if (c.node_.IsDefined()) {
      c.anchor_.reset(c.node_);
    }
    return c;
  }

  /// Rejects keys outside `allowed`.
  void only_keys(std::initializer_list<const char*> allowed) const {
    if (!present()) {
      return;
    }
    if (!node_.IsMap()) {
      fail("expected a mapping");
    }
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      bool ok = false;
      for (const char* a : allowed) {
        ok = ok || key == a;
      }
      if (!ok) {
        ConfigNode(kv.first, path_.empty() ? key : path_ + "." + key, source_, overridden_)
            .fail("unknown key");
      }
    }
  }

  double as_double() const {
    require();
    try {
      const double v = node_.as<double>();
      if (!std::isfinite(v)) {
        fail("value must be finite");
      }
      return v;
    } catch (const YAML::Exception&) {
      fail("expected a number");
    }
  }

  long as_integer() const {
    require();
    try {
      return node_.as<long>();
    } catch (const YAML::Exception&) {
      fail("expected an integer");
    }
  }

  std::string as_string() const {
    require();
    if (!node_.IsScalar()) {
      fail("expected a scalar");
    }
    return node_.as<std::string>();
  }

  double get(const std::string& key, double fallback) const {
    const ConfigNode c = child(key);
    return c.present() ? c.as_double() : fallback;
  }

  std::optional<double> get_optional(const std::string& key) const {
    const ConfigNode c = child(key);
    return c.present() ? std::optional<double>(c.as_double()) : std::nullopt;
  }

  double positive(const std::string& key, double fallback) const {
    const ConfigNode c = child(key);
    const double v = c.present() ? c.as_double() : fallback;
    if (!(v > 0.0)) {
      c.fail("must be positive");
    }
    return v;
  }

  std::vector<double> as_double_list() const {
    require();
    if (!node_.IsSequence()) {
      fail("expected a list of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < node_.size(); ++i) {
      out.push_back(item(i).as_double());
    }
    return out;
  }

  cplx as_complex() const {
    require();
    if (node_.IsSequence()) {
      if (node_.size() != 2) {
        fail("complex entries are written [re, im]");
      }
      return {item(0).as_double(), item(1).as_double()};
    }
    return {as_double(), 0.0};
  }

  Matrix as_matrix() const {
    require();
    if (!node_.IsSequence() || node_.size() == 0) {
      fail("expected a non-empty list of rows");
    }
    const auto rows = static_cast<Eigen::Index>(node_.size());
    Matrix m;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const ConfigNode row = item(static_cast<std::size_t>(r));
      if (!row.yaml().IsSequence()) {
        row.fail("expected a row list");
      }
      if (r == 0) {
        m.resize(rows, static_cast<Eigen::Index>(row.yaml().size()));
      }
      if (static_cast<Eigen::Index>(row.yaml().size()) != m.cols()) {
        row.fail("ragged matrix");
      }
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        m(r, c) = row.item(static_cast<std::size_t>(c)).as_complex();
      }
    }
    return m;
  }

  ConfigNode item(std::size_t i) const {
    const YAML::Node& self = node_;
    return ConfigNode(self[i], path_ + "[" + std::to_string(i) + "]", source_, overridden_);
  }

 private:
  void require() const {
    if (!present()) {
      fail("missing required value");
    }
  }

  YAML::Node node_;
  YAML::Node anchor_;
  std::string path_;
  const std::string* source_;
  const std::set<std::string>* overridden_;
};

inline SystemSpec parse_system(const ConfigNode& n) {
  SystemSpec s;
  const std::string kind = n.child("kind").present() ? n.child("kind").as_string() : "two_spin";
  if (kind == "two_spin") {
    n.only_keys({"kind", "delta_a", "delta_b", "jx", "jy"});
    s.kind = SystemSpec::Kind::two_spin;
    s.two_spin.delta_a = n.get("delta_a", s.two_spin.delta_a);
    s.two_spin.delta_b = n.get("delta_b", s.two_spin.delta_b);
    s.two_spin.jx = n.get("jx", s.two_spin.jx);
    s.two_spin.jy = n.get("jy", s.two_spin.jy);
  } else if (kind == "matrices") {
    n.only_keys({"kind", "h_a", "h_b", "nu"});
    s.kind = SystemSpec::Kind::matrices;
    s.h_a = n.child("h_a").as_matrix();
    s.h_b = n.child("h_b").as_matrix();
    s.nu = n.child("nu").as_matrix();
    for (const char* key : {"h_a", "h_b", "nu"}) {
      const Matrix& m = key[0] == 'n' ? s.nu : (key[2] == 'a' ? s.h_a : s.h_b);
      if (m.rows() != m.cols()) {
        n.child(key).fail("matrix must be square");
      }
      if (hermiticity_defect(m) > kHermitianTol) {
        n.child(key).fail("matrix must be Hermitian");
      }
    }
    if (s.nu.rows() != s.h_a.rows() * s.h_b.rows()) {
      n.child("nu").fail("dimension must equal dim(h_a) * dim(h_b)");
    }
  } else {
    n.child("kind").fail("unknown system kind '" + kind + "' (two_spin, matrices)");
  }
  return s;
}

inline StateSpec parse_state(const ConfigNode& n) {
  StateSpec s;
  const std::string kind =
      n.child("kind").present() ? n.child("kind").as_string() : "two_spin_pure";
  if (kind == "two_spin_pure") {
    n.only_keys({"kind", "pop_a", "pop_b", "phase_a", "phase_b"});
    s.kind = StateSpec::Kind::two_spin_pure;
    s.pop_a = n.get("pop_a", s.pop_a);
    s.pop_b = n.get("pop_b", s.pop_b);
    s.phase_a = n.get("phase_a", s.phase_a);
    s.phase_b = n.get("phase_b", s.phase_b);
    for (const char* key : {"pop_a", "pop_b"}) {
      const double p = key[4] == 'a' ? s.pop_a : s.pop_b;
      if (p < 0.0 || p > 1.0) {
        n.child(key).fail("population must lie in [0, 1]");
      }
    }
  } else if (kind == "product") {
    n.only_keys({"kind", "rho_a", "rho_b"});
    s.kind = StateSpec::Kind::product;
    s.rho_a = n.child("rho_a").as_matrix();
    s.rho_b = n.child("rho_b").as_matrix();
  } else if (kind == "maximally_mixed") {
    n.only_keys({"kind"});
    s.kind = StateSpec::Kind::maximally_mixed;
  } else {
    n.child("kind").fail("unknown initial_state kind '" + kind +
                         "' (two_spin_pure, product, maximally_mixed)");
  }
  return s;
}

inline InteractionSpec parse_interaction(const ConfigNode& n) {
  n.only_keys({"tau", "lambda", "v0", "spatial", "temporal"});
  InteractionSpec s;
  s.tau = n.positive("tau", 0.0);
  s.lambda = n.get_optional("lambda");
  s.v0 = n.get_optional("v0");
  if (s.lambda && s.v0) {
    n.child("v0").fail("give either lambda or v0, not both");
  }
  if (!s.lambda && !s.v0) {
    s.lambda = 0.0;
  }

  const ConfigNode sp = n.child("spatial");
  sp.only_keys({"kind", "a", "samples"});
  const std::string skind = sp.child("kind").present() ? sp.child("kind").as_string() : "sinusoidal";
  if (skind == "sinusoidal") {
    s.spatial_kind = SpatialPotential::Kind::sinusoidal;
  } else if (skind == "square") {
    s.spatial_kind = SpatialPotential::Kind::square;
  } else if (skind == "sampled") {
    s.spatial_kind = SpatialPotential::Kind::sampled;
    s.spatial_samples = sp.child("samples").as_double_list();
    if (s.spatial_samples.size() < 2) {
      sp.child("samples").fail("need at least two samples");
    }
  } else {
    sp.child("kind").fail("unknown spatial kind '" + skind + "' (sinusoidal, square, sampled)");
  }
  s.a = sp.positive("a", s.a);

  const ConfigNode tp = n.child("temporal");
  tp.only_keys({"kind", "samples"});
  const std::string tkind = tp.child("kind").present() ? tp.child("kind").as_string() : "triangular";
  if (tkind == "triangular") {
    s.temporal_kind = TemporalPotential::Kind::triangular;
  } else if (tkind == "square") {
    s.temporal_kind = TemporalPotential::Kind::square;
  } else if (tkind == "sampled") {
    s.temporal_kind = TemporalPotential::Kind::sampled;
    s.temporal_samples = tp.child("samples").as_double_list();
    if (s.temporal_samples.size() < 2) {
      tp.child("samples").fail("need at least two samples");
    }
  } else {
    tp.child("kind").fail("unknown temporal kind '" + tkind + "' (triangular, square, sampled)");
  }
  return s;
}

inline KineticSpec parse_kinetic(const ConfigNode& n) {
  n.only_keys({"mass", "p0", "x0", "sigma_p", "sigma_x"});
  KineticSpec s;
  s.mass = n.positive("mass", 1.0);
  if (n.child("p0").present()) {
    s.p0 = n.positive("p0", 0.0);
  }
  s.x0 = n.get("x0", 0.0);
  if (n.child("sigma_p").present()) {
    s.sigma_p = n.positive("sigma_p", 0.0);
  }
  if (n.child("sigma_x").present()) {
    s.sigma_x = n.positive("sigma_x", 0.0);
  }
  return s;
}

inline std::vector<Model> parse_models(const ConfigNode& n) {
  if (!n.present()) {
    return {Model::exact_sm, Model::semiclassical, Model::time_dependent};
  }
  if (!n.yaml().IsSequence() || n.yaml().size() == 0) {
    n.fail("expected a non-empty list of model names");
  }
  std::vector<Model> out;
  for (std::size_t i = 0; i < n.yaml().size(); ++i) {
    const ConfigNode item = n.item(i);
    const std::string name = item.as_string();
    Model m{};
    if (name == "exact_sm") {
      m = Model::exact_sm;
    } else if (name == "random_unitary") {
      m = Model::random_unitary;
    } else if (name == "semiclassical") {
      m = Model::semiclassical;
    } else if (name == "time_dependent") {
      m = Model::time_dependent;
    } else if (name == "magnus1") {
      m = Model::magnus1;
    } else {
      item.fail("unknown model '" + name +
                "' (exact_sm, random_unitary, semiclassical, time_dependent, magnus1)");
    }
    for (Model seen : out) {
      if (seen == m) {
        item.fail("model listed twice");
      }
    }
    out.push_back(m);
  }
  return out;
}

inline SweepSpec parse_sweep(const ConfigNode& n) {
  SweepSpec s;
  if (!n.present()) {
    return s;
  }
  n.only_keys({"variable", "values"});
  const std::string var = n.child("variable").as_string();
  if (var == "lambda") {
    s.variable = SweepVariable::lambda;
  } else if (var == "sigma_x") {
    s.variable = SweepVariable::sigma_x;
  } else {
    n.child("variable").fail("unknown sweep variable '" + var + "' (lambda, sigma_x)");
  }
  const ConfigNode values = n.child("values");
  if (values.present() && values.yaml().IsMap()) {
    values.only_keys({"start", "stop", "count"});
    const double start = values.child("start").as_double();
    const double stop = values.child("stop").as_double();
    const long count = values.child("count").as_integer();
    if (count < 1) {
      values.child("count").fail("count must be at least 1");
    }
    for (long i = 0; i < count; ++i) {
      s.values.push_back(count == 1 ? start
                                    : start + (stop - start) * static_cast<double>(i) /
                                                  static_cast<double>(count - 1));
    }
  } else {
    s.values = values.as_double_list();
  }
  if (s.values.empty()) {
    values.fail("sweep needs at least one value");
  }
  return s;
}

inline QuadratureSpec parse_quadrature(const ConfigNode& n) {
  n.only_keys({"nodes", "n_sigma", "tol", "smatrix_mode", "max_panels", "grid_min_points",
               "grid_phase_step"});
  QuadratureSpec q;
  auto positive_count = [&](const char* key, std::size_t fallback) {
    const ConfigNode c = n.child(key);
    if (!c.present()) {
      return fallback;
    }
    const long v = c.as_integer();
    if (v < 1) {
      c.fail("must be a positive integer");
    }
    return static_cast<std::size_t>(v);
  };
  q.nodes = positive_count("nodes", q.nodes);
  q.max_panels = positive_count("max_panels", q.max_panels);
  q.grid_min_points = positive_count("grid_min_points", q.grid_min_points);
  if (q.grid_min_points < 4) {
    n.child("grid_min_points").fail("cubic interpolation needs at least 4 points");
  }
  q.n_sigma = n.positive("n_sigma", q.n_sigma);
  q.tol = n.positive("tol", q.tol);
  q.grid_phase_step = n.positive("grid_phase_step", q.grid_phase_step);
  if (n.child("smatrix_mode").present()) {
    const std::string mode = n.child("smatrix_mode").as_string();
    if (mode == "grid") {
      q.mode = SMatrixMode::grid;
    } else if (mode == "exact") {
      q.mode = SMatrixMode::exact;
    } else {
      n.child("smatrix_mode").fail("unknown mode '" + mode + "' (grid, exact)");
    }
  }
  return q;
}

// Sets `value` at a dotted path, creating intermediate maps.
inline void set_path(YAML::Node root, const std::string& path, const YAML::Node& value) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) {
      throw ConfigError("--set " + path + ": empty path component");
    }
    parts.push_back(part);
  }
  if (parts.empty()) {
    throw ConfigError("--set: empty key");
  }
  YAML::Node cursor = root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = cursor[parts[i]];
    if (!next.IsDefined() || next.IsNull()) {
      cursor[parts[i]] = YAML::Node(YAML::NodeType::Map);
      next.reset(cursor[parts[i]]);
    } else if (!next.IsMap()) {
      throw ConfigError("--set " + path + ": '" + parts[i] + "' is not a mapping");
    }
    cursor.reset(next);
  }
  cursor[parts.back()] = value;
}

}  // namespace detail

/// Parses a configuration document. `overrides` are "dotted.key=value"
/// strings whose values are read as YAML.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source,
                                     const std::vector<std::string>& overrides = {}) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" +
                      std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) {
    throw ConfigError(source + ": top level must be a mapping");
  }
  std::set<std::string> overridden;
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set " + o + ": expected key=value");
    }
    const std::string key = o.substr(0, eq);
    YAML::Node value;
    try {
      value = YAML::Load(o.substr(eq + 1));
    } catch (const YAML::ParserException& e) {
      throw ConfigError("--set " + key + ": " + e.msg);
    }
    detail::set_path(root, key, value);
    overridden.insert(key);
  }

  ExperimentConfig c;
  c.source = source;
  const detail::ConfigNode top(root, "", &c.source, &overridden);
  top.only_keys({"schema_version", "system", "initial_state", "interaction", "kinetic", "models",
                 "sweep", "quadrature", "ode", "output", "smatrix_dump"});
  const detail::ConfigNode version = top.child("schema_version");
  c.schema_version = static_cast<int>(version.as_integer());
  if (c.schema_version != kSchemaVersion) {
    version.fail("unsupported schema_version " + std::to_string(c.schema_version) +
                 " (this build reads " + std::to_string(kSchemaVersion) + ")");
  }
  c.system = detail::parse_system(top.child("system"));
  c.state = detail::parse_state(top.child("initial_state"));
  c.interaction = detail::parse_interaction(top.child("interaction"));
  c.kinetic = detail::parse_kinetic(top.child("kinetic"));
  c.models = detail::parse_models(top.child("models"));
  c.sweep = detail::parse_sweep(top.child("sweep"));
  c.quadrature = detail::parse_quadrature(top.child("quadrature"));

  const detail::ConfigNode ode = top.child("ode");
  ode.only_keys({"tol"});
  c.ode_tol = ode.positive("tol", c.ode_tol);

  const detail::ConfigNode out = top.child("output");
  out.only_keys({"dir", "csv", "json"});
  if (out.child("dir").present()) {
    c.output.dir = out.child("dir").as_string();
  }
  if (out.child("csv").present()) {
    c.output.csv = out.child("csv").as_string();
  }
  if (out.child("json").present()) {
    c.output.json = out.child("json").as_string();
  }

  const detail::ConfigNode dump = top.child("smatrix_dump");
  dump.only_keys({"e_min", "e_max", "points"});
  c.smatrix_dump.e_min = dump.get_optional("e_min");
  c.smatrix_dump.e_max = dump.get_optional("e_max");
  if (dump.child("points").present()) {
    const long pts = dump.child("points").as_integer();
    if (pts < 1) {
      dump.child("points").fail("must be a positive integer");
    }
    c.smatrix_dump.points = static_cast<std::size_t>(pts);
  }

  if (c.system.kind == SystemSpec::Kind::matrices &&
      c.state.kind == StateSpec::Kind::two_spin_pure &&
      (c.system.h_a.rows() != 2 || c.system.h_b.rows() != 2)) {
    top.child("initial_state").fail("two_spin_pure needs two qubit subsystems");
  }
  if (c.state.kind == StateSpec::Kind::product) {
    const Eigen::Index da =
        c.system.kind == SystemSpec::Kind::two_spin ? 2 : c.system.h_a.rows();
    const Eigen::Index db =
        c.system.kind == SystemSpec::Kind::two_spin ? 2 : c.system.h_b.rows();
    if (c.state.rho_a.rows() != da || c.state.rho_b.rows() != db) {
      top.child("initial_state").fail("factor dimensions do not match the system");
    }
  }
  return c;
}

}  // namespace qscat
