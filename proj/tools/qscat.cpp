// Command-line driver for the collision models.
//
//   qscat collide --config run.yaml [--out DIR] [--threads N]
//   qscat sweep   --config run.yaml --set sweep.variable=lambda
//   qscat regime  --config run.yaml
//   qscat smatrix --config run.yaml
//
// Exit codes: 0 success, 1 unexpected error, 2 configuration error,
// 3 numerical-quality failure (results are still written).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qscat/config.hpp"
#include "qscat/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string config;
  std::optional<std::string> out;
  unsigned threads = 0;
  std::optional<double> quad_tol;
  std::optional<double> ode_tol;
  std::vector<std::string> sets;
};

qscat::ExperimentConfig load(const Options& opt) {
  std::ifstream in(opt.config);
  if (!in) {
    throw qscat::ConfigError(opt.config + ": cannot open file");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  qscat::ExperimentConfig c = qscat::parse_config(buf.str(), opt.config, opt.sets);
  if (opt.quad_tol) {
    c.quadrature.tol = *opt.quad_tol;
  }
  if (opt.ode_tol) {
    c.ode_tol = *opt.ode_tol;
  }
  if (opt.out) {
    c.output.dir = *opt.out;
  }
  return c;
}

unsigned thread_count(const Options& opt) {
  if (opt.threads > 0) {
    return opt.threads;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

fs::path output_file(const qscat::ExperimentConfig& c, const std::string& name) {
  const fs::path dir(c.output.dir);
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
  std::cout << "wrote " << path.string() << '\n';
}

int cmd_collide(const Options& opt) {
  qscat::ExperimentConfig c = load(opt);
  c.quadrature.threads = thread_count(opt);
  const std::vector<qscat::CollisionReport> reports = qscat::run_single(c);
  write_text(output_file(c, c.output.json), qscat::collide_json(c, reports).dump(2) + "\n");
  int code = kExitOk;
  for (const qscat::CollisionReport& r : reports) {
    std::cout << r.model << ": deltaE=" << r.delta_e << " deltaS=" << r.delta_s
              << " trace_defect=" << r.trace_defect << '\n';
    for (const std::string& f : r.quality_failures) {
      std::cerr << r.model << ": quality failure: " << f << '\n';
      code = kExitNumerical;
    }
  }
  return code;
}

int cmd_sweep(const Options& opt) {
  const qscat::ExperimentConfig c = load(opt);
  const std::vector<qscat::SweepRow> rows = qscat::run_sweep(c, thread_count(opt));
  write_text(output_file(c, c.output.csv), qscat::sweep_csv(rows));
  int code = kExitOk;
  for (const qscat::SweepRow& row : rows) {
    if (row.numerical_failure) {
      std::cerr << qscat::to_string(row.model) << " at " << row.value << ": " << row.error << '\n';
      code = kExitNumerical;
    }
  }
  return code;
}

int cmd_regime(const Options& opt) {
  const qscat::ExperimentConfig c = load(opt);
  const nlohmann::json j = qscat::check_regime(c);
  write_text(output_file(c, "regime.json"), j.dump(2) + "\n");
  std::cout << j["regime"].dump(2) << '\n';
  return kExitOk;
}

int cmd_smatrix(const Options& opt) {
  const qscat::ExperimentConfig c = load(opt);
  const qscat::SMatrixDump dump = qscat::dump_smatrix(c, thread_count(opt));
  write_text(output_file(c, "smatrix.csv"), qscat::smatrix_csv(dump));
  double worst = 0.0;
  for (const auto& s : dump.solutions) {
    worst = std::max(worst, s->defect);
  }
  std::cout << "max unitarity defect " << worst << '\n';
  return worst > qscat::kSMatrixDefectGate ? kExitNumerical : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum collision models for a structured particle"};
  app.require_subcommand(1, 1);
  Options opt;
  auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "YAML experiment file")->required();
    sub->add_option("--out", opt.out, "output directory (overrides output.dir)");
    sub->add_option("--threads", opt.threads, "worker threads (0 = hardware)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--quad-tol", opt.quad_tol, "quadrature tolerance")
        ->check(CLI::PositiveNumber);
    sub->add_option("--ode-tol", opt.ode_tol, "ODE tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--set", opt.sets, "override a config key, e.g. interaction.lambda=2");
  };
  CLI::App* collide = app.add_subcommand("collide", "run every configured model at one point");
  CLI::App* sweep = app.add_subcommand("sweep", "sweep lambda or sigma_x and write CSV");
  CLI::App* regime = app.add_subcommand("regime", "report the validity ratios");
  CLI::App* smatrix = app.add_subcommand("smatrix", "dump exact s(E) on an energy grid");
  for (CLI::App* sub : {collide, sweep, regime, smatrix}) {
    add_common(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (collide->parsed()) {
      return cmd_collide(opt);
    }
    if (sweep->parsed()) {
      return cmd_sweep(opt);
    }
    if (regime->parsed()) {
      return cmd_regime(opt);
    }
    return cmd_smatrix(opt);
  } catch (const qscat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const qscat::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
}
