#pragma once

// Per-frame update of a rope: integrate, approximate forces, position-based correction of
// the springs, then self-collision response. The stages always run in that order.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dlo/core_math.hpp"
#include "dlo/dlo_model.hpp"
#include "dlo/integrators.hpp"
#include "dlo/kernels.hpp"

namespace dlo {

struct EngineConfig {
  double dt = 1e-3;                     // s
  int pbd_iterations = 0;
  double pbd_stiffness = 1.0;           // [0, 1]
  double collision_radius = 0.0;        // m; <= 0 disables collision handling
  double collision_stiffness = 0.0;     // N/m
  std::vector<std::size_t> pinned_nodes;
  Vector3 external_accel;               // m/s², e.g. gravity
  KernelMode kernel = KernelMode::serial;
  double divergence_bound = 1e6;        // m
  bool diagnostics = true;              // fill the energy and stretch fields of FrameReport

  /// Throws PreconditionError describing the first invalid field.
  void validate(std::size_t node_count) const;
};

struct FrameReport {
  std::vector<Vector3> approximated_forces;  // m·(v_new - v_old)/dt, N
  double max_stretch = 0.0;
  std::size_t collision_pairs = 0;
  double kinetic_energy = 0.0;     // J
  double potential_energy = 0.0;   // J: elastic plus -m·g·x
  double wall_time = 0.0;          // s
};

enum class Stage { integrate, approximate_forces, correct_positions, resolve_collisions };

/// Inverse masses with pinned nodes set to zero.
std::vector<double> inverse_masses(const DloTopology& topology, std::span<const std::size_t> pinned);

/// Gauss-Seidel projection of every spring in list order, repeated cfg.pbd_iterations
/// times. Positions move along each spring axis; velocities receive (x_new - x_old)/dt.
void pbd_project_springs(const DloTopology& topology, DloState& state, const EngineConfig& cfg);

/// Detects non-adjacent spine segment pairs closer than 2·radius, separates them, removes
/// approaching normal velocity and accumulates penalty forces into state.force_accumulator.
std::vector<CollisionPair> resolve_collisions(const DloTopology& topology, DloState& state,
                                              const EngineConfig& cfg);

double kinetic_energy(const DloTopology& topology, const DloState& state);
double potential_energy(const DloTopology& topology, const DloState& state, const Vector3& accel);

class Engine {
 public:
  Engine(const DloTopology& topology, IntegratorKind kind, EngineConfig cfg);

  const EngineConfig& config() const { return cfg_; }
  const Stepper& stepper() const { return stepper_; }
  std::size_t steps_taken() const { return steps_; }
  double time() const { return time_; }

  /// Initializes scheme memory from the state and records pinned positions.
  void reset(const DloState& state);

  /// One full frame. `external` holds extra per-node forces held constant over the frame
  /// (empty means none). Throws DivergenceError when a coordinate is non-finite or beyond
  /// cfg.divergence_bound.
  FrameReport step(DloState& state, std::span<const Vector3> external = {});

  void set_stage_observer(std::function<void(Stage, const DloState&)> observer) {
    observer_ = std::move(observer);
  }

  /// The acceleration field used by the integration stage for fixed external forces and
  /// accumulator contents.
  AccelerationField acceleration_field(std::span<const Vector3> external,
                                       std::span<const Vector3> accumulator);

 private:
  void notify(Stage stage, const DloState& state) const;
  void restore_pins(DloState& state) const;
  void check_bounds(const DloState& state) const;

  const DloTopology& topology_;
  EngineConfig cfg_;
  Stepper stepper_;
  std::optional<ForceGatherPlan> plan_;
  std::vector<double> inv_mass_;
  std::vector<char> pinned_mask_;
  std::vector<Vector3> pinned_positions_;
  std::function<void(Stage, const DloState&)> observer_;

  PhaseState phase_;
  std::vector<Vector3> zero_external_;
  std::vector<Vector3> node_positions_;
  std::vector<Vector3> node_forces_;
  std::vector<Vector3> scratch_;
  std::vector<Vector3> v_before_;
  std::vector<Vector3> x_integrated_;
  std::vector<Vector3> v_integrated_;
  std::size_t steps_ = 0;
  double time_ = 0.0;
  bool initialized_ = false;
};

}  // namespace dlo
