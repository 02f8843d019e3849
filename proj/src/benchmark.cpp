#include "dlo/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "dlo/errors.hpp"

namespace dlo {

namespace {

double least_squares_slope(std::span<const double> ys) {
  const double n = static_cast<double>(ys.size());
  if (ys.size() < 2) return 0.0;
  const double mean_x = 0.5 * (n - 1.0);
  double mean_y = 0.0;
  for (double y : ys) mean_y += y;
  mean_y /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double dx = static_cast<double>(i) - mean_x;
    sxy += dx * (ys[i] - mean_y);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

class ScalarSession : public SteppingSession {
 public:
  ScalarSession(const ScalarOdeSystem& system, IntegratorKind kind, double dt)
      : field_(system.field()), stepper_(kind), state_(system.initial_state()), dt_(dt) {
    stepper_.init(field_, state_, dt_);
  }
  void advance() override { stepper_.step(field_, state_, dt_); }

 private:
  AccelerationField field_;
  Stepper stepper_;
  PhaseState state_;
  double dt_;
};

class DloSession : public SteppingSession {
 public:
  DloSession(const DloScenario& scenario, IntegratorKind kind, double dt)
      : scenario_(scenario),
        engine_(scenario.topology(), kind, scenario.engine_config(dt)),
        state_(scenario.initial_state()) {
    engine_.reset(state_);
    external_.assign(state_.size(), Vector3{});
  }
  void advance() override {
    scenario_.external_forces(engine_.time(), state_, external_);
    engine_.step(state_, external_);
  }

 private:
  const DloScenario& scenario_;
  Engine engine_;
  DloState state_;
  std::vector<Vector3> external_;
};

bool within(const std::vector<Vector3>& positions, double bound) {
  return std::all_of(positions.begin(), positions.end(), [bound](const Vector3& p) {
    return std::abs(p.x) <= bound && std::abs(p.y) <= bound && std::abs(p.z) <= bound;
  });
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

// --- scalar systems ----------------------------------------------------------

ScalarOdeSystem::ScalarOdeSystem(Kind kind, std::string name, double x0, double v0)
    : kind_(kind), name_(std::move(name)), x0_(x0), v0_(v0) {
  if (kind_ == Kind::pendulum) {
    field_ = [](std::span<const double> x, std::span<const double>, std::span<double> a) { a[0] = -std::sin(x[0]); };
  } else {
    field_ = [](std::span<const double> x, std::span<const double>, std::span<double> a) { a[0] = -x[0]; };
  }
}

ScalarOdeSystem ScalarOdeSystem::pendulum(double theta0, double omega0) {
  return {Kind::pendulum, "pendulum", theta0, omega0};
}

ScalarOdeSystem ScalarOdeSystem::harmonic(double x0, double v0) { return {Kind::harmonic, "harmonic", x0, v0}; }

double ScalarOdeSystem::hamiltonian(double x, double v) const {
  return kind_ == Kind::pendulum ? 0.5 * v * v - std::cos(x) : 0.5 * (v * v + x * x);
}

double ScalarOdeSystem::energy(double x, double v) const {
  return kind_ == Kind::pendulum ? hamiltonian(x, v) + 1.0 : hamiltonian(x, v);
}

TrialOutcome ScalarOdeSystem::run_trial(IntegratorKind kind, double dt, const StabilityCriterion& crit) const {
  TrialOutcome out;
  PhaseState s = initial_state();
  out.initial_energy = energy(s.x[0], s.v[0]);
  out.max_energy = out.initial_energy;
  const double ceiling = crit.energy_ceiling_factor * out.initial_energy;
  Stepper stepper(kind);
  try {
    stepper.init(field_, s, dt);
    for (std::size_t n = 0; n < crit.horizon_steps; ++n) {
      stepper.step(field_, s, dt);
      out.steps_completed = n + 1;
      const double e = energy(s.x[0], s.v[0]);
      out.max_energy = std::max(out.max_energy, e);
      if (!(e <= ceiling)) {
        out.reason = fmt::format("energy {:.6g} above ceiling {:.6g} at step {}", e, ceiling, n + 1);
        return out;
      }
      if (!(std::abs(s.x[0]) <= crit.position_bound)) {
        out.reason = fmt::format("position left the bound at step {}", n + 1);
        return out;
      }
    }
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.reason = e.what();
    return out;
  }
  out.stable = true;
  return out;
}

std::unique_ptr<SteppingSession> ScalarOdeSystem::start(IntegratorKind kind, double dt) const {
  return std::make_unique<ScalarSession>(*this, kind, dt);
}

// --- rope scenario -----------------------------------------------------------

std::vector<Vector3> straight_spine(std::size_t segments, double length) {
  if (segments < 2) throw PreconditionError("straight_spine: need at least 2 segments");
  if (!(length > 0.0)) throw PreconditionError("straight_spine: length must be positive");
  std::vector<Vector3> spine(segments + 1);
  for (std::size_t k = 0; k <= segments; ++k) spine[k] = {length * static_cast<double>(k) / segments, 0.0, 0.0};
  return spine;
}

std::vector<Vector3> hairpin_spine(std::size_t segments, double segment_length, double gap) {
  if (segments < 6) throw PreconditionError("hairpin_spine: need at least 6 segments");
  if (!(segment_length > 0.0) || !(gap > 0.0)) throw PreconditionError("hairpin_spine: sizes must be positive");
  // The bend takes enough segments to close a half circle of diameter `gap`.
  const double radius = 0.5 * gap;
  auto bend = static_cast<std::size_t>(std::ceil(std::numbers::pi * radius / segment_length));
  bend = std::max<std::size_t>(bend, 2);
  if (bend + 4 > segments) throw PreconditionError("hairpin_spine: too few segments for the bend");
  const std::size_t leg = (segments - bend) / 2;
  const std::size_t other_leg = segments - bend - leg;

  std::vector<Vector3> spine;
  spine.reserve(segments + 1);
  // First leg runs toward +x at y = 0 and ends at the bend start.
  const double leg_end = static_cast<double>(leg) * segment_length;
  for (std::size_t k = 0; k <= leg; ++k) spine.push_back({static_cast<double>(k) * segment_length, 0.0, 0.0});
  for (std::size_t k = 1; k < bend; ++k) {
    const double phi = std::numbers::pi * static_cast<double>(k) / static_cast<double>(bend);
    spine.push_back({leg_end + radius * std::sin(phi), radius - radius * std::cos(phi), 0.0});
  }
  for (std::size_t k = 0; k <= other_leg; ++k) {
    spine.push_back({leg_end - static_cast<double>(k) * segment_length, gap, 0.0});
  }
  return spine;
}

DloScenarioParams default_dlo_scenario() {
  DloScenarioParams p;
  p.segments = 30;
  p.length = 1.0;
  p.topology.mass_total = 0.05;
  p.topology.stiffness = {20.0, 0.02, 2.0};
  p.topology.volume_mode = VolumeMode::as_printed;
  p.engine.pbd_iterations = 2;
  p.engine.pbd_stiffness = 0.5;
  p.engine.collision_radius = 0.005;
  p.engine.collision_stiffness = 10.0;
  p.engine.external_accel = {0.0, 0.0, -9.81};
  p.engine.divergence_bound = 1e6;
  p.pinned_spine_nodes = 1;
  return p;
}

DloScenario::DloScenario(DloScenarioParams params) : params_(std::move(params)) {
  if (params_.spine.empty()) params_.spine = straight_spine(params_.segments, params_.length);
  topology_ = build_topology(params_.spine, params_.topology);
  if (params_.pinned_spine_nodes > topology_.spine_count()) {
    throw PreconditionError("scenario: more pinned spine nodes than the rope has");
  }
  auto& pinned = params_.engine.pinned_nodes;
  for (std::size_t k = 0; k < params_.pinned_spine_nodes; ++k) {
    pinned.push_back(DloTopology::r_node(k));
    pinned.push_back(DloTopology::q_node(k));
    pinned.push_back(DloTopology::p_node(k));
  }
  std::sort(pinned.begin(), pinned.end());
  pinned.erase(std::unique(pinned.begin(), pinned.end()), pinned.end());
  params_.engine.validate(topology_.node_count());
  double rope_length = 0.0;
  for (std::size_t k = 1; k < params_.spine.size(); ++k) rope_length += norm(params_.spine[k] - params_.spine[k - 1]);
  energy_offset_ = topology_.mass_total * norm(params_.engine.external_accel) * rope_length;
}

EngineConfig DloScenario::engine_config(double dt) const {
  EngineConfig cfg = params_.engine;
  cfg.dt = dt;
  return cfg;
}

DloState DloScenario::initial_state() const {
  DloState state = make_rest_state(topology_);
  if (params_.velocity_jitter > 0.0) {
    std::mt19937_64 rng(params_.seed);
    std::normal_distribution<double> jitter(0.0, params_.velocity_jitter);
    for (Vector3& v : state.velocities) v = {jitter(rng), jitter(rng), jitter(rng)};
    for (std::size_t p : params_.engine.pinned_nodes) state.velocities[p] = Vector3{};
  }
  return state;
}

void DloScenario::external_forces(double t, const DloState& state, std::vector<Vector3>& out) const {
  out.assign(state.size(), Vector3{});
  const PullScript& pull = params_.pull;
  if (!(t < pull.duration)) return;
  const double wave = std::sin(2.0 * std::numbers::pi * pull.frequency * t);
  const std::size_t last = topology_.spine_count() - 1;
  const Vector3 axis = normalized(params_.spine[last] - params_.spine[last - 1]);
  out[DloTopology::r_node(last)] += (pull.pull_amplitude * wave) * axis;

  const Vector3& r = state.positions[DloTopology::r_node(last)];
  for (std::size_t node : {DloTopology::q_node(last), DloTopology::p_node(last)}) {
    const Vector3 arm = state.positions[node] - r;
    const Vector3 dir = cross(axis, arm);
    const double len = norm(dir);
    if (len > 1e-12) out[node] += (pull.twist_amplitude * wave / len) * dir;
  }
}

double DloScenario::energy(const FrameReport& report) const {
  return report.kinetic_energy + report.potential_energy + energy_offset_;
}

TrialOutcome DloScenario::run_trial(IntegratorKind kind, double dt, const StabilityCriterion& crit) const {
  TrialOutcome out;
  DloState state = initial_state();
  EngineConfig cfg = engine_config(dt);
  cfg.diagnostics = true;
  Engine engine(topology_, kind, cfg);
  engine.reset(state);
  FrameReport initial;
  initial.kinetic_energy = kinetic_energy(topology_, state);
  initial.potential_energy = potential_energy(topology_, state, cfg.external_accel);
  out.initial_energy = energy(initial);
  out.max_energy = out.initial_energy;
  const double ceiling = crit.energy_ceiling_factor * std::abs(out.initial_energy);
  std::vector<Vector3> external;
  try {
    for (std::size_t n = 0; n < crit.horizon_steps; ++n) {
      external_forces(engine.time(), state, external);
      const FrameReport report = engine.step(state, external);
      out.steps_completed = n + 1;
      const double e = energy(report);
      out.max_energy = std::max(out.max_energy, e);
      if (!(e <= ceiling)) {
        out.reason = fmt::format("energy {:.6g} above ceiling {:.6g} at step {}", e, ceiling, n + 1);
        return out;
      }
      if (!within(state.positions, crit.position_bound)) {
        out.reason = fmt::format("positions left the bound at step {}", n + 1);
        return out;
      }
    }
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.reason = e.what();
    return out;
  } catch (const GeometryError& e) {
    out.diverged = true;
    out.reason = e.what();
    return out;
  }
  out.stable = true;
  return out;
}

std::unique_ptr<SteppingSession> DloScenario::start(IntegratorKind kind, double dt) const {
  return std::make_unique<DloSession>(*this, kind, dt);
}

// --- measurements ------------------------------------------------------------

MaxDtResult find_max_dt(const BenchSystem& system, IntegratorKind kind, const StabilityCriterion& crit,
                        double dt_lo, double dt_hi) {
  if (!(dt_lo > 0.0) || !(dt_hi > dt_lo)) throw PreconditionError("find_max_dt: need 0 < dt_lo < dt_hi");
  MaxDtResult result;
  auto stable = [&](double dt) {
    ++result.trials;
    return system.run_trial(kind, dt, crit).stable;
  };
  if (!stable(dt_lo)) {
    throw BracketError(fmt::format("{}: lower bracket dt = {:g} is already unstable", spec_of(kind).name, dt_lo));
  }
  double lo = dt_lo;
  double hi = dt_hi;
  for (int widen = 0; stable(hi); ++widen) {
    result.bracket_widened = true;
    if (widen == 20) {
      result.unbounded = true;
      result.max_dt = hi;
      return result;
    }
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-3 * lo) {
    const double mid = 0.5 * (lo + hi);
    (stable(mid) ? lo : hi) = mid;
  }
  // Stability need not be monotone in dt; walk up until the next 0.1% step fails.
  for (int guard = 0; guard < 1000 && stable(1.001 * lo); ++guard) lo *= 1.001;
  result.max_dt = lo;
  return result;
}

IterationTiming time_iteration(const BenchSystem& system, IntegratorKind kind, double dt, std::size_t iterations,
                               std::size_t warmup) {
  if (iterations < 2) throw PreconditionError("time_iteration: need at least 2 iterations");
  const auto session = system.start(kind, dt);
  for (std::size_t i = 0; i < warmup; ++i) session->advance();
  std::vector<double> samples(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    session->advance();
    samples[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  IterationTiming out;
  out.iterations = iterations;
  for (double s : samples) out.mean += s;
  out.mean /= static_cast<double>(iterations);
  double var = 0.0;
  for (double s : samples) var += (s - out.mean) * (s - out.mean);
  out.stddev = std::sqrt(var / static_cast<double>(iterations - 1));
  return out;
}

SymplecticVerdict classify_symplectic(const ScalarOdeSystem& system, IntegratorKind kind, double h,
                                      std::size_t steps, std::size_t substeps) {
  if (!(h > 0.0) || steps < 2 || substeps < 1) throw PreconditionError("classify_symplectic: bad arguments");
  const double sub_h = h / static_cast<double>(substeps);
  PhaseState s = system.initial_state();
  Stepper stepper(kind);
  const AccelerationField& f = system.field();
  stepper.init(f, s, sub_h);
  const double h0 = system.hamiltonian(s.x[0], s.v[0]);
  std::vector<double> errors;
  errors.reserve(steps + 1);
  errors.push_back(0.0);
  SymplecticVerdict out;
  try {
    for (std::size_t n = 0; n < steps; ++n) {
      for (std::size_t k = 0; k < substeps; ++k) stepper.step(f, s, sub_h);
      errors.push_back(system.hamiltonian(s.x[0], s.v[0]) - h0);
    }
  } catch (const DivergenceError&) {
    out.diverged = true;
    out.drift_slope = std::numeric_limits<double>::infinity();
    out.peak_to_peak = std::numeric_limits<double>::infinity();
    return out;
  }
  out.drift_slope = least_squares_slope(errors);
  const auto [lo, hi] = std::minmax_element(errors.begin(), errors.end());
  out.peak_to_peak = *hi - *lo;
  out.symplectic = std::abs(out.drift_slope) < 1e-9 && out.peak_to_peak < 0.05;
  return out;
}

double score(double max_dt, double iter_time) {
  if (!(max_dt > 0.0) || !(iter_time > 0.0)) throw PreconditionError("score: max_dt and iter_time must be positive");
  return max_dt / iter_time;
}

PhaseTrajectory phase_trajectory(const ScalarOdeSystem& system, IntegratorKind kind, double h, std::size_t steps) {
  if (!(h > 0.0)) throw PreconditionError("phase_trajectory: h must be positive");
  PhaseTrajectory out;
  PhaseState s = system.initial_state();
  Stepper stepper(kind);
  const AccelerationField& f = system.field();
  stepper.init(f, s, h);
  out.rows.push_back({0, s.x[0], s.v[0], system.hamiltonian(s.x[0], s.v[0])});
  for (std::size_t n = 1; n <= steps; ++n) {
    try {
      stepper.step(f, s, h);
    } catch (const DivergenceError&) {
      out.diverged = true;
      out.divergence_step = n;
      return out;
    }
    out.rows.push_back({n, s.x[0], s.v[0], system.hamiltonian(s.x[0], s.v[0])});
  }
  return out;
}

std::string phase_to_csv(const PhaseTrajectory& trajectory) {
  std::string out = "step,theta,omega,H\n";
  for (const PhaseRow& r : trajectory.rows) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", r.step, r.theta, r.omega, r.energy);
  }
  if (trajectory.diverged) out += fmt::format("# diverged at step {}\n", trajectory.divergence_step);
  return out;
}

PhaseTrajectory phase_from_csv(const std::string& text) {
  PhaseTrajectory out;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "step,theta,omega,H") throw PreconditionError("phase csv: bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# diverged at step ", 0) == 0) {
      out.diverged = true;
      out.divergence_step = std::stoull(line.substr(19));
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 4) throw PreconditionError("phase csv: expected 4 columns in '" + line + "'");
    out.rows.push_back({std::stoull(cells[0]), std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])});
  }
  return out;
}

double harmonic_order(IntegratorKind kind) {
  const ScalarOdeSystem system = ScalarOdeSystem::harmonic(1.0, 0.0);
  const double h_list[] = {0.1, 0.05, 0.025, 0.0125};
  return measured_order(kind, system.field(), system.initial_state(),
                        [](double t) { return std::vector<double>{std::cos(t)}; }, 1.0, h_list);
}

BenchmarkReport run_benchmark(const BenchSystem& system, const BenchmarkOptions& options) {
  std::vector<IntegratorKind> kinds = options.integrators;
  if (kinds.empty()) {
    for (const IntegratorSpec& s : all_integrators()) kinds.push_back(s.kind);
  }
  BenchmarkReport report;
  report.scenario = system.name();
  report.rows.resize(kinds.size());
  const ScalarOdeSystem pendulum = ScalarOdeSystem::pendulum(1.0, 0.0);
  const auto count = static_cast<std::ptrdiff_t>(kinds.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    BenchmarkRow& row = report.rows[static_cast<std::size_t>(i)];
    const IntegratorKind kind = kinds[static_cast<std::size_t>(i)];
    row.integrator = std::string(spec_of(kind).name);
    try {
      row.max_dt = find_max_dt(system, kind, options.criterion, options.dt_lo, options.dt_hi).max_dt;
      row.symplectic = classify_symplectic(pendulum, kind, options.classify_h, options.classify_steps).symplectic;
      row.measured_order = harmonic_order(kind);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }

  double timing_dt = std::numeric_limits<double>::infinity();
  for (const BenchmarkRow& row : report.rows) {
    if (row.error.empty()) timing_dt = std::min(timing_dt, 0.5 * row.max_dt);
  }
  if (options.timing_dt) timing_dt = *options.timing_dt;
  report.timing_dt = std::isfinite(timing_dt) ? timing_dt : 0.0;

  for (std::size_t i = 0; i < kinds.size(); ++i) {
    BenchmarkRow& row = report.rows[i];
    if (!row.error.empty()) continue;
    try {
      const IterationTiming t =
          time_iteration(system, kinds[i], report.timing_dt, options.timing_iterations, options.timing_warmup);
      row.iter_time = t.mean;
      row.iter_time_stddev = t.stddev;
      row.score = score(row.max_dt, row.iter_time);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }
  return report;
}

std::string report_to_csv(const BenchmarkReport& report) {
  std::string out = "integrator,max_dt_s,iter_time_s,symplectic,measured_order,score\n";
  for (const BenchmarkRow& r : report.rows) {
    if (!r.error.empty()) {
      out += fmt::format("{},nan,nan,{},nan,nan\n", r.integrator, r.symplectic ? "true" : "false");
      continue;
    }
    out += fmt::format("{},{:.9g},{:.9g},{},{:.6g},{:.9g}\n", r.integrator, r.max_dt, r.iter_time,
                       r.symplectic ? "true" : "false", r.measured_order, r.score);
  }
  return out;
}

std::vector<BenchmarkRow> report_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "integrator,max_dt_s,iter_time_s,symplectic,measured_order,score") {
    throw PreconditionError("report csv: bad header");
  }
  std::vector<BenchmarkRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 6) throw PreconditionError("report csv: expected 6 columns in '" + line + "'");
    if (cells[3] != "true" && cells[3] != "false") throw PreconditionError("report csv: bad symplectic flag");
    BenchmarkRow r;
    r.integrator = cells[0];
    r.max_dt = std::stod(cells[1]);
    r.iter_time = std::stod(cells[2]);
    r.symplectic = cells[3] == "true";
    r.measured_order = std::stod(cells[4]);
    r.score = std::stod(cells[5]);
    if (std::isnan(r.max_dt)) r.error = "failed";
    rows.push_back(r);
  }
  return rows;
}

std::string report_to_table(const BenchmarkReport& report) {
  std::string out = fmt::format("{:<22} {:>12} {:>12} {:>10} {:>7} {:>12}\n", "Method", "Max dt (s)", "Time (s)",
                                "Symplectic", "Order", "Score");
  for (const BenchmarkRow& r : report.rows) {
    const std::string_view display = spec_of(parse_integrator(r.integrator)).display_name;
    if (!r.error.empty()) {
      out += fmt::format("{:<22} failed: {}\n", display, r.error);
      continue;
    }
    out += fmt::format("{:<22} {:>12.5g} {:>12.4g} {:>10} {:>7.2f} {:>12.5g}\n", display, r.max_dt, r.iter_time,
                       r.symplectic ? "yes" : "no", r.measured_order, r.score);
  }
  return out;
}

}  // namespace dlo
