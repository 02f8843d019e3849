#pragma once

// Integrator benchmark: largest stable step, cost per iteration, energy-drift based
// symplecticity verdict, convergence order, and the score max_dt / iter_time.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlo/dlo_model.hpp"
#include "dlo/engine.hpp"
#include "dlo/integrators.hpp"

namespace dlo {

struct StabilityCriterion {
  std::size_t horizon_steps = 10000;
  double energy_ceiling_factor = 2.0;
  double position_bound = 1e3;
};

struct TrialOutcome {
  bool stable = false;
  bool diverged = false;
  std::size_t steps_completed = 0;
  double initial_energy = 0.0;
  double max_energy = 0.0;
  std::string reason;
};

/// One advancing simulation, used for timing.
class SteppingSession {
 public:
  virtual ~SteppingSession() = default;
  virtual void advance() = 0;
};

/// A system the harness can probe for stability and cost.
class BenchSystem {
 public:
  virtual ~BenchSystem() = default;
  virtual std::string name() const = 0;
  virtual TrialOutcome run_trial(IntegratorKind kind, double dt, const StabilityCriterion& crit) const = 0;
  virtual std::unique_ptr<SteppingSession> start(IntegratorKind kind, double dt) const = 0;
};

/// Autonomous one-degree-of-freedom system x'' = f(x), probed with its non-negative
/// energy (zero at the resting equilibrium).
class ScalarOdeSystem : public BenchSystem {
 public:
  static ScalarOdeSystem pendulum(double theta0 = 1.0, double omega0 = 0.0);
  static ScalarOdeSystem harmonic(double x0 = 1.0, double v0 = 0.0);

  std::string name() const override { return name_; }
  TrialOutcome run_trial(IntegratorKind kind, double dt, const StabilityCriterion& crit) const override;
  std::unique_ptr<SteppingSession> start(IntegratorKind kind, double dt) const override;

  const AccelerationField& field() const { return field_; }
  PhaseState initial_state() const { return {{x0_}, {v0_}}; }
  /// Non-negative energy: v²/2 + potential, potential zero at x = 0.
  double energy(double x, double v) const;
  /// Hamiltonian as usually written (pendulum: ω²/2 - cos θ).
  double hamiltonian(double x, double v) const;

 private:
  enum class Kind { pendulum, harmonic };
  ScalarOdeSystem(Kind kind, std::string name, double x0, double v0);

  Kind kind_;
  std::string name_;
  double x0_;
  double v0_;
  AccelerationField field_;
};

/// Scripted load applied to the free end of the rope for `duration` seconds: a
/// sinusoidal pull along the rest tangent and a force couple twisting the end frame.
struct PullScript {
  double pull_amplitude = 0.05;   // N
  double twist_amplitude = 0.005;  // N on each satellite
  double frequency = 1.0;          // Hz
  double duration = 2.0;           // s
};

struct DloScenarioParams {
  std::size_t segments = 30;
  double length = 1.0;  // m
  TopologyParams topology;
  EngineConfig engine;  // dt is overridden per trial
  PullScript pull;
  std::size_t pinned_spine_nodes = 1;  // pins R_k, Q_k, P_k for k < this
  std::vector<Vector3> spine;          // optional explicit spine (overrides segments/length)
  double velocity_jitter = 0.0;        // m/s, std-dev of a seeded initial velocity perturbation
  std::uint64_t seed = 42;
};

DloScenarioParams default_dlo_scenario();

/// Straight rope along +x starting at the origin.
std::vector<Vector3> straight_spine(std::size_t segments, double length);
/// U-shaped rope: two legs along x `gap` apart joined by a half circle.
std::vector<Vector3> hairpin_spine(std::size_t segments, double segment_length, double gap);

class DloScenario : public BenchSystem {
 public:
  explicit DloScenario(DloScenarioParams params);

  std::string name() const override { return "dlo"; }
  TrialOutcome run_trial(IntegratorKind kind, double dt, const StabilityCriterion& crit) const override;
  std::unique_ptr<SteppingSession> start(IntegratorKind kind, double dt) const override;

  const DloTopology& topology() const { return topology_; }
  const DloScenarioParams& params() const { return params_; }
  EngineConfig engine_config(double dt) const;
  DloState initial_state() const;
  /// Scripted external forces at time t for the given state.
  void external_forces(double t, const DloState& state, std::vector<Vector3>& out) const;
  /// Kinetic + elastic + gravitational energy shifted by the drop of the whole rope
  /// along the gravity direction, so a hanging rope has energy near zero.
  double energy(const FrameReport& report) const;
  double energy_offset() const { return energy_offset_; }

 private:
  DloScenarioParams params_;
  DloTopology topology_;
  double energy_offset_ = 0.0;
};

class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MaxDtResult {
  double max_dt = 0.0;
  std::size_t trials = 0;
  bool bracket_widened = false;
  bool unbounded = false;  // still stable at the widest probe
};

/// Bisection for the largest stable step to relative width 1e-3. Postcondition: max_dt is
/// stable and 1.001·max_dt is not. Throws BracketError when dt_lo is already unstable.
MaxDtResult find_max_dt(const BenchSystem& system, IntegratorKind kind, const StabilityCriterion& crit,
                        double dt_lo, double dt_hi);

struct IterationTiming {
  double mean = 0.0;    // s
  double stddev = 0.0;  // s
  std::size_t iterations = 0;
};

/// Mean wall-clock time per step over `iterations` after `warmup` excluded steps.
IterationTiming time_iteration(const BenchSystem& system, IntegratorKind kind, double dt,
                               std::size_t iterations = 1000, std::size_t warmup = 100);

struct SymplecticVerdict {
  bool symplectic = false;
  bool diverged = false;
  double drift_slope = 0.0;     // energy error per step, least-squares
  double peak_to_peak = 0.0;    // max - min energy error
};

/// Energy-drift classification on the pendulum: symplectic iff |slope| < 1e-9 per step
/// and peak-to-peak energy error < 0.05. `substeps` > 1 refines each recorded step.
SymplecticVerdict classify_symplectic(const ScalarOdeSystem& system, IntegratorKind kind, double h,
                                      std::size_t steps, std::size_t substeps = 1);

double score(double max_dt, double iter_time);

struct PhaseRow {
  std::size_t step = 0;
  double theta = 0.0;
  double omega = 0.0;
  double energy = 0.0;  // ω²/2 - cos θ
};

struct PhaseTrajectory {
  std::vector<PhaseRow> rows;
  bool diverged = false;
  std::size_t divergence_step = 0;
};

PhaseTrajectory phase_trajectory(const ScalarOdeSystem& system, IntegratorKind kind, double h,
                                 std::size_t steps);
std::string phase_to_csv(const PhaseTrajectory& trajectory);
PhaseTrajectory phase_from_csv(const std::string& text);

/// Convergence slope on the harmonic oscillator x'' = -x, x(0)=1, v(0)=0, at t = 1 with
/// h = 0.1, 0.05, 0.025, 0.0125.
double harmonic_order(IntegratorKind kind);

struct BenchmarkRow {
  std::string integrator;
  double max_dt = 0.0;
  double iter_time = 0.0;
  double iter_time_stddev = 0.0;
  bool symplectic = false;
  double measured_order = 0.0;
  double score = 0.0;
  std::string error;  // empty on success
};

struct BenchmarkReport {
  std::string scenario;
  double timing_dt = 0.0;
  std::vector<BenchmarkRow> rows;
};

struct BenchmarkOptions {
  std::vector<IntegratorKind> integrators;
  StabilityCriterion criterion;
  double dt_lo = 1e-4;
  double dt_hi = 1.0;
  std::size_t classify_steps = 100000;
  double classify_h = 0.1;
  std::size_t timing_iterations = 1000;
  std::size_t timing_warmup = 100;
  std::optional<double> timing_dt;  // default: half the smallest max_dt
};

/// Stability, symplecticity and order for each integrator (in parallel), then timing
/// (single-threaded). Failures are recorded per row.
BenchmarkReport run_benchmark(const BenchSystem& system, const BenchmarkOptions& options);

std::string report_to_csv(const BenchmarkReport& report);
std::vector<BenchmarkRow> report_from_csv(const std::string& text);
std::string report_to_table(const BenchmarkReport& report);

}  // namespace dlo
