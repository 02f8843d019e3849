// dlosim: run rope and pendulum scenarios, integrator benchmarks and phase-space exports.
//
//   dlosim simulate --config run.json [--out dir] [--integrator Name] [--quiet]
//   dlosim bench    --config bench.json
//   dlosim phase    --config phase.json
//
// Exit codes: 0 success, 1 config error, 2 numerical divergence.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dlo/benchmark.hpp"
#include "dlo/engine.hpp"
#include "dlo/errors.hpp"
#include "dlo/scenario.hpp"

namespace fs = std::filesystem;
using namespace dlo;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kDiverged = 2;

struct Options {
  std::string config;
  std::string out;
  std::string integrator;
  bool quiet = false;
};

void add_options(CLI::App& cmd, Options& opt) {
  cmd.add_option("--config", opt.config, "Scenario config (JSON)")->required();
  cmd.add_option("--out", opt.out, "Output directory (overrides output_dir)");
  cmd.add_option("--integrator", opt.integrator, "Run only this integrator");
  cmd.add_flag("--quiet", opt.quiet, "Suppress progress output");
}

ScenarioConfig resolve(const Options& opt) {
  ScenarioConfig c = load_config(opt.config);
  if (!opt.out.empty()) c.output_dir = opt.out;
  if (!opt.integrator.empty()) {
    try {
      c.integrators = {parse_integrator(opt.integrator)};
    } catch (const PreconditionError& e) {
      throw ConfigError(std::string("--integrator: ") + e.what());
    }
    c.bench.integrators = c.integrators;
  }
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

fs::path prepare_output(const ScenarioConfig& c, const std::string& command) {
  const fs::path dir = c.output_dir;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["tool"] = "dlosim";
  manifest["version"] = DLOSIM_VERSION;
  manifest["command"] = command;
  manifest["config"] = nlohmann::json::parse(config_to_json(c));
  write_file(dir / "run_manifest.json", manifest.dump(2) + "\n");
  return dir;
}

std::string trace_row(std::size_t step, double time, double ke, double pe, double stretch, std::size_t pairs) {
  return fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", step, time, ke, pe, stretch, pairs);
}

int simulate(const ScenarioConfig& c, bool quiet) {
  const fs::path dir = prepare_output(c, "simulate");
  const IntegratorKind kind = c.integrators.front();
  std::string trace = "step,time,kinetic_energy,potential_energy,max_stretch,collision_pairs\n";
  int status = kOk;

  if (c.kind == ScenarioKind::dlo) {
    const DloScenario scenario(resolved_rope(c));
    const DloTopology& topo = scenario.topology();
    Engine engine(topo, kind, scenario.engine_config(c.dt));
    DloState state = scenario.initial_state();
    engine.reset(state);
    trace += trace_row(0, 0.0, kinetic_energy(topo, state),
                       potential_energy(topo, state, engine.config().external_accel),
                       max_stretch_ratio(topo, state.positions), 0);
    std::vector<Vector3> external;
    try {
      for (std::size_t n = 1; n <= c.steps; ++n) {
        scenario.external_forces(engine.time(), state, external);
        const FrameReport r = engine.step(state, external);
        trace += trace_row(n, engine.time(), r.kinetic_energy, r.potential_energy, r.max_stretch,
                           r.collision_pairs);
      }
    } catch (const DivergenceError& e) {
      std::cerr << "diverged at step " << e.step() << ": " << e.what() << "\n";
      status = kDiverged;
    } catch (const GeometryError& e) {
      std::cerr << "diverged at step " << engine.steps_taken() + 1 << ": " << e.what() << "\n";
      status = kDiverged;
    }
  } else {
    const ScalarOdeSystem system = c.kind == ScenarioKind::pendulum
                                       ? ScalarOdeSystem::pendulum(c.initial_x, c.initial_v)
                                       : ScalarOdeSystem::harmonic(c.initial_x, c.initial_v);
    PhaseState s = system.initial_state();
    Stepper stepper(kind);
    stepper.init(system.field(), s, c.dt);
    auto row = [&](std::size_t n) {
      const double ke = 0.5 * s.v[0] * s.v[0];
      trace += trace_row(n, static_cast<double>(n) * c.dt, ke, system.energy(s.x[0], s.v[0]) - ke, 0.0, 0);
    };
    row(0);
    try {
      for (std::size_t n = 1; n <= c.steps; ++n) {
        stepper.step(system.field(), s, c.dt);
        if (!(std::abs(s.x[0]) <= c.criterion.position_bound)) {
          throw DivergenceError(n, fmt::format("state left the bound at step {}", n));
        }
        row(n);
      }
    } catch (const DivergenceError& e) {
      std::cerr << "diverged at step " << e.step() << ": " << e.what() << "\n";
      status = kDiverged;
    }
  }

  write_file(dir / "trace.csv", trace);
  if (!quiet) std::cout << fmt::format("{} {} steps -> {}\n", spec_of(kind).name, c.steps, (dir / "trace.csv").string());
  return status;
}

int bench(const ScenarioConfig& c, bool quiet) {
  const fs::path dir = prepare_output(c, "bench");
  const auto system = make_system(c);
  const BenchmarkReport report = run_benchmark(*system, c.bench);
  write_file(dir / "report.csv", report_to_csv(report));
  const std::string table = report_to_table(report);
  write_file(dir / "report.txt", table);
  if (!quiet) std::cout << table;
  return kOk;
}

int phase(const ScenarioConfig& c, bool quiet) {
  if (c.kind == ScenarioKind::dlo) throw ConfigError("scenario: phase trajectories need 'pendulum' or 'harmonic'");
  const fs::path dir = prepare_output(c, "phase");
  const ScalarOdeSystem system = c.kind == ScenarioKind::pendulum
                                     ? ScalarOdeSystem::pendulum(c.initial_x, c.initial_v)
                                     : ScalarOdeSystem::harmonic(c.initial_x, c.initial_v);
  const std::vector<double> dts = c.phase_dts.empty() ? std::vector<double>{c.dt} : c.phase_dts;
  int status = kOk;
  for (IntegratorKind kind : c.integrators) {
    for (double dt : dts) {
      const PhaseTrajectory t = phase_trajectory(system, kind, dt, c.steps);
      const fs::path file = dir / fmt::format("phase_{}_{:g}.csv", spec_of(kind).name, dt);
      write_file(file, phase_to_csv(t));
      if (t.diverged) {
        std::cerr << fmt::format("{} at dt={:g} diverged at step {}\n", spec_of(kind).name, dt, t.divergence_step);
        status = kDiverged;
      }
      if (!quiet) std::cout << file.string() << "\n";
    }
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rope simulation and integrator benchmark tool"};
  app.set_version_flag("--version", DLOSIM_VERSION);
  app.require_subcommand(1);
  Options opt;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Run the engine and write a frame trace");
  CLI::App* bench_cmd = app.add_subcommand("bench", "Benchmark the integrators");
  CLI::App* phase_cmd = app.add_subcommand("phase", "Write pendulum phase-space trajectories");
  for (CLI::App* cmd : {sim_cmd, bench_cmd, phase_cmd}) add_options(*cmd, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const ScenarioConfig c = resolve(opt);
    if (sim_cmd->parsed()) return simulate(c, opt.quiet);
    if (bench_cmd->parsed()) return bench(c, opt.quiet);
    return phase(c, opt.quiet);
  } catch (const PreconditionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const GeometryError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
}
