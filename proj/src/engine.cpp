#include "dlo/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "dlo/errors.hpp"

namespace dlo {

namespace {

void project_springs(const DloTopology& topology, std::span<const double> inv_mass,
                     std::span<Vector3> x, int iterations, double stiffness) {
  for (int it = 0; it < iterations; ++it) {
    for (const SpringConstraint& c : topology.springs) {
      const double wi = inv_mass[c.i];
      const double wj = inv_mass[c.j];
      if (wi + wj == 0.0) continue;
      const Vector3 d = x[c.i] - x[c.j];
      const double length = norm(d);
      if (length <= 1e-12) continue;
      const double correction = stiffness * (length - c.rest_length) / (wi + wj);
      const Vector3 axis = d / length;
      x[c.i] -= (wi * correction) * axis;
      x[c.j] += (wj * correction) * axis;
    }
  }
}

Vector3 contact_normal(const SegmentClosest& c, const Vector3& dir_a, const Vector3& dir_b) {
  const Vector3 gap = c.on_first - c.on_second;
  if (norm(gap) > 1e-12) return gap / norm(gap);
  const Vector3 side = cross(dir_a, dir_b);
  if (norm(side) > 1e-12) return side / norm(side);
  return {0.0, 0.0, 1.0};
}

std::vector<CollisionPair> collide(const DloTopology& topology, std::span<const double> inv_mass,
                                   DloState& state, const EngineConfig& cfg) {
  const double radius = cfg.collision_radius;
  std::vector<CollisionPair> pairs =
      cfg.kernel == KernelMode::serial ? detect_collisions_serial(topology, state.positions, radius)
                                       : detect_collisions_parallel(topology, state.positions, radius);
  auto& x = state.positions;
  auto& v = state.velocities;
  auto& df = state.force_accumulator;

  for (const CollisionPair& pair : pairs) {
    const std::size_t node[4] = {DloTopology::r_node(pair.first), DloTopology::r_node(pair.first + 1),
                                 DloTopology::r_node(pair.second), DloTopology::r_node(pair.second + 1)};
    // Penalty force from the penetration seen at detection time.
    const double detected_depth = 2.0 * radius - pair.closest.distance;

    const SegmentClosest c = closest_points(x[node[0]], x[node[1]], x[node[2]], x[node[3]]);
    const Vector3 n = contact_normal(c, x[node[1]] - x[node[0]], x[node[3]] - x[node[2]]);
    // Barycentric weights; the second segment's weights carry the minus sign of -∂C/∂b.
    const double w[4] = {1.0 - c.s, c.s, -(1.0 - c.t), -c.t};
    const double side[4] = {1.0, 1.0, -1.0, -1.0};

    // Each segment moves as a whole along the normal, split by inverse mass.
    double mobility = 0.0;
    for (int a = 0; a < 4; ++a) mobility += 0.5 * inv_mass[node[a]];

    if (mobility > 0.0) {
      const double depth = 2.0 * radius - c.distance;
      if (depth > 0.0) {
        for (int a = 0; a < 4; ++a) x[node[a]] += (side[a] * depth * inv_mass[node[a]] / mobility) * n;
      }
      double approach = 0.0;
      for (int a = 0; a < 4; ++a) approach += 0.5 * side[a] * dot(v[node[a]], n);
      if (approach < 0.0) {
        for (int a = 0; a < 4; ++a) v[node[a]] -= (side[a] * approach * inv_mass[node[a]] / mobility) * n;
      }
    }

    const double push = cfg.collision_stiffness * detected_depth;
    for (int a = 0; a < 4; ++a) df[node[a]] += (w[a] * push) * n;
  }
  return pairs;
}

}  // namespace

void EngineConfig::validate(std::size_t node_count) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("engine.dt must be positive");
  if (pbd_iterations < 0) throw PreconditionError("engine.pbd_iterations must be >= 0");
  if (!(pbd_stiffness >= 0.0 && pbd_stiffness <= 1.0)) {
    throw PreconditionError("engine.pbd_stiffness must lie in [0, 1]");
  }
  if (collision_stiffness < 0.0) throw PreconditionError("engine.collision_stiffness must be >= 0");
  for (std::size_t p : pinned_nodes) {
    if (p >= node_count) throw PreconditionError("engine.pinned_nodes: index " + std::to_string(p) + " out of range");
  }
  if (!is_finite(external_accel)) throw PreconditionError("engine.external_accel must be finite");
}

std::vector<double> inverse_masses(const DloTopology& topology, std::span<const std::size_t> pinned) {
  std::vector<double> inv(topology.node_count());
  for (std::size_t n = 0; n < inv.size(); ++n) inv[n] = 1.0 / topology.masses[n];
  for (std::size_t p : pinned) inv[p] = 0.0;
  return inv;
}

void pbd_project_springs(const DloTopology& topology, DloState& state, const EngineConfig& cfg) {
  if (cfg.pbd_iterations == 0) return;
  const std::vector<double> inv = inverse_masses(topology, cfg.pinned_nodes);
  const std::vector<Vector3> before = state.positions;
  project_springs(topology, inv, state.positions, cfg.pbd_iterations, cfg.pbd_stiffness);
  for (std::size_t n = 0; n < before.size(); ++n) {
    state.velocities[n] += (state.positions[n] - before[n]) / cfg.dt;
  }
}

std::vector<CollisionPair> resolve_collisions(const DloTopology& topology, DloState& state,
                                              const EngineConfig& cfg) {
  if (!(cfg.collision_radius > 0.0)) throw PreconditionError("resolve_collisions: radius must be > 0");
  const std::vector<double> inv = inverse_masses(topology, cfg.pinned_nodes);
  return collide(topology, inv, state, cfg);
}

double kinetic_energy(const DloTopology& topology, const DloState& state) {
  double e = 0.0;
  for (std::size_t n = 0; n < state.size(); ++n) e += 0.5 * topology.masses[n] * norm_squared(state.velocities[n]);
  return e;
}

double potential_energy(const DloTopology& topology, const DloState& state, const Vector3& accel) {
  double e = elastic_energy(topology, state.positions);
  for (std::size_t n = 0; n < state.size(); ++n) e -= topology.masses[n] * dot(accel, state.positions[n]);
  return e;
}

Engine::Engine(const DloTopology& topology, IntegratorKind kind, EngineConfig cfg)
    : topology_(topology), cfg_(std::move(cfg)), stepper_(kind) {
  cfg_.validate(topology.node_count());
  if (cfg_.kernel == KernelMode::parallel) plan_.emplace(topology);
  inv_mass_ = inverse_masses(topology, cfg_.pinned_nodes);
  pinned_mask_.assign(topology.node_count(), 0);
  for (std::size_t p : cfg_.pinned_nodes) pinned_mask_[p] = 1;
  zero_external_.assign(topology.node_count(), Vector3{});
  node_positions_.resize(topology.node_count());
  node_forces_.resize(topology.node_count());
}

AccelerationField Engine::acceleration_field(std::span<const Vector3> external,
                                             std::span<const Vector3> accumulator) {
  return [this, external, accumulator](std::span<const double> x, std::span<const double>,
                                       std::span<double> a) {
    const std::size_t nodes = topology_.node_count();
    for (std::size_t n = 0; n < nodes; ++n) node_positions_[n] = {x[3 * n], x[3 * n + 1], x[3 * n + 2]};
    if (plan_) {
      total_forces_parallel(topology_, *plan_, node_positions_, external, accumulator, node_forces_, scratch_);
    } else {
      total_forces_serial(topology_, node_positions_, external, accumulator, node_forces_);
    }
    const Vector3& g = cfg_.external_accel;
    for (std::size_t n = 0; n < nodes; ++n) {
      if (pinned_mask_[n]) {
        a[3 * n] = a[3 * n + 1] = a[3 * n + 2] = 0.0;
        continue;
      }
      const double m = topology_.masses[n];
      a[3 * n] = g.x + node_forces_[n].x / m;
      a[3 * n + 1] = g.y + node_forces_[n].y / m;
      a[3 * n + 2] = g.z + node_forces_[n].z / m;
    }
  };
}

void Engine::reset(const DloState& state) {
  if (state.size() != topology_.node_count()) throw PreconditionError("engine: state size does not match topology");
  pinned_positions_.clear();
  for (std::size_t p : cfg_.pinned_nodes) pinned_positions_.push_back(state.positions[p]);

  const std::size_t nodes = topology_.node_count();
  phase_.x.resize(3 * nodes);
  phase_.v.resize(3 * nodes);
  for (std::size_t n = 0; n < nodes; ++n) {
    for (int c = 0; c < 3; ++c) {
      phase_.x[3 * n + c] = state.positions[n][c];
      phase_.v[3 * n + c] = pinned_mask_[n] ? 0.0 : state.velocities[n][c];
    }
  }
  stepper_.init(acceleration_field(zero_external_, state.force_accumulator), phase_, cfg_.dt);
  steps_ = 0;
  time_ = 0.0;
  initialized_ = true;
}

void Engine::notify(Stage stage, const DloState& state) const {
  if (observer_) observer_(stage, state);
}

void Engine::restore_pins(DloState& state) const {
  for (std::size_t i = 0; i < cfg_.pinned_nodes.size(); ++i) {
    state.positions[cfg_.pinned_nodes[i]] = pinned_positions_[i];
    state.velocities[cfg_.pinned_nodes[i]] = Vector3{};
  }
}

void Engine::check_bounds(const DloState& state) const {
  for (const Vector3& p : state.positions) {
    if (!is_finite(p) || std::abs(p.x) > cfg_.divergence_bound || std::abs(p.y) > cfg_.divergence_bound ||
        std::abs(p.z) > cfg_.divergence_bound) {
      throw DivergenceError(steps_ + 1, "engine: state left the bounded region at step " +
                                            std::to_string(steps_ + 1));
    }
  }
  for (const Vector3& v : state.velocities) {
    if (!is_finite(v)) {
      throw DivergenceError(steps_ + 1, "engine: non-finite velocity at step " + std::to_string(steps_ + 1));
    }
  }
}

FrameReport Engine::step(DloState& state, std::span<const Vector3> external) {
  const auto started = std::chrono::steady_clock::now();
  if (!initialized_) reset(state);
  if (external.empty()) external = zero_external_;
  const std::size_t nodes = topology_.node_count();
  const double dt = cfg_.dt;
  FrameReport report;

  // 1. integrate with internal + external + accumulated collision forces, then clear Δf.
  v_before_ = state.velocities;
  state.previous_positions = state.positions;
  for (std::size_t n = 0; n < nodes; ++n) {
    for (int c = 0; c < 3; ++c) {
      phase_.x[3 * n + c] = state.positions[n][c];
      phase_.v[3 * n + c] = state.velocities[n][c];
    }
  }
  try {
    stepper_.step(acceleration_field(external, state.force_accumulator), phase_, dt);
  } catch (const DivergenceError&) {
    throw DivergenceError(steps_ + 1, "engine: integrator produced a non-finite state at step " +
                                          std::to_string(steps_ + 1));
  }
  for (std::size_t n = 0; n < nodes; ++n) {
    state.positions[n] = {phase_.x[3 * n], phase_.x[3 * n + 1], phase_.x[3 * n + 2]};
    state.velocities[n] = {phase_.v[3 * n], phase_.v[3 * n + 1], phase_.v[3 * n + 2]};
  }
  restore_pins(state);
  std::fill(state.force_accumulator.begin(), state.force_accumulator.end(), Vector3{});
  check_bounds(state);
  notify(Stage::integrate, state);

  // 2. force approximation from the velocity change.
  report.approximated_forces.resize(nodes);
  for (std::size_t n = 0; n < nodes; ++n) {
    report.approximated_forces[n] = (topology_.masses[n] / dt) * (state.velocities[n] - v_before_[n]);
  }
  notify(Stage::approximate_forces, state);

  x_integrated_ = state.positions;
  v_integrated_ = state.velocities;
  const auto& x_integrated = x_integrated_;
  const auto& v_integrated = v_integrated_;

  // 3. position-based spring relaxation.
  if (cfg_.pbd_iterations > 0) {
    project_springs(topology_, inv_mass_, state.positions, cfg_.pbd_iterations, cfg_.pbd_stiffness);
    for (std::size_t n = 0; n < nodes; ++n) {
      state.velocities[n] += (state.positions[n] - x_integrated[n]) / dt;
    }
    restore_pins(state);
  }
  notify(Stage::correct_positions, state);

  // 4. self-collision response; penalty forces go to Δf for the next frame.
  if (cfg_.collision_radius > 0.0) {
    report.collision_pairs = collide(topology_, inv_mass_, state, cfg_).size();
    restore_pins(state);
  }
  notify(Stage::resolve_collisions, state);

  if (stepper_.spec().kind == IntegratorKind::Verlet) {
    std::vector<double> dx(3 * nodes), dv(3 * nodes);
    for (std::size_t n = 0; n < nodes; ++n) {
      for (int c = 0; c < 3; ++c) {
        dx[3 * n + c] = state.positions[n][c] - x_integrated[n][c];
        dv[3 * n + c] = state.velocities[n][c] - v_integrated[n][c];
      }
    }
    stepper_.apply_correction(dx, dv, dt);
  }
  check_bounds(state);

  ++steps_;
  time_ += dt;
  if (cfg_.diagnostics) {
    report.max_stretch = max_stretch_ratio(topology_, state.positions);
    report.kinetic_energy = kinetic_energy(topology_, state);
    report.potential_energy = potential_energy(topology_, state, cfg_.external_accel);
  }
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace dlo
