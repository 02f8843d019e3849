#include <doctest.h>

#include <cstring>
#include <numbers>

#include "dlo/benchmark.hpp"
#include "dlo/engine.hpp"
#include "dlo/errors.hpp"
#include "oracles.hpp"

using namespace dlo;
using doctest::Approx;

namespace {

using K = IntegratorKind;

std::vector<Vector3> straight(std::size_t points, double step) {
  std::vector<Vector3> s;
  for (std::size_t k = 0; k < points; ++k) s.push_back({step * static_cast<double>(k), 0, 0});
  return s;
}

std::vector<Vector3> helix(std::size_t points) {
  std::vector<Vector3> s;
  for (std::size_t k = 0; k < points; ++k) {
    const double a = 0.3 * static_cast<double>(k);
    s.push_back({0.1 * std::cos(a), 0.1 * std::sin(a), 0.01 * a});
  }
  return s;
}

DloTopology rope(const std::vector<Vector3>& spine, Stiffness k = {20.0, 0.02, 2.0}, double mass = 0.05) {
  TopologyParams p;
  p.stiffness = k;
  p.mass_total = mass;
  p.volume_mode = VolumeMode::as_printed;
  return build_topology(spine, p);
}

// Two nodes joined by one spring.
DloTopology dumbbell(double rest, double k, double m) {
  DloTopology t;
  t.spine = {{0, 0, 0}, {rest, 0, 0}};
  t.rest_positions = t.spine;
  t.masses = {m, m};
  t.mass_total = 2 * m;
  t.stiffness = {k, 0, 0};
  t.springs.push_back({0, 1, rest, k});
  return t;
}

double max_deviation(const std::vector<Vector3>& a, const std::vector<Vector3>& b) {
  double worst = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) worst = std::max(worst, norm(a[n] - b[n]));
  return worst;
}

bool bitwise_equal(const std::vector<Vector3>& a, const std::vector<Vector3>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(Vector3)) == 0;
}

}  // namespace

TEST_CASE("engine config validation") {
  const DloTopology t = rope(straight(5, 0.1));
  EngineConfig c;
  CHECK_NOTHROW(c.validate(t.node_count()));
  c.dt = -1e-3;
  CHECK_THROWS_AS(c.validate(t.node_count()), PreconditionError);
  c = {};
  c.pbd_stiffness = 1.5;
  CHECK_THROWS_AS(c.validate(t.node_count()), PreconditionError);
  c = {};
  c.pbd_iterations = -1;
  CHECK_THROWS_AS(c.validate(t.node_count()), PreconditionError);
  c = {};
  c.pinned_nodes = {t.node_count()};
  CHECK_THROWS_AS(Engine(t, K::SymplecticEuler, c), PreconditionError);
}

TEST_CASE("rest state is a fixed point for every integrator") {
  const DloTopology t = rope(helix(16));
  for (const IntegratorSpec& spec : all_integrators()) {
    CAPTURE(spec.name);
    EngineConfig c;
    c.dt = 1e-4;
    Engine engine(t, spec.kind, c);
    DloState s = make_rest_state(t);
    for (int n = 0; n < 100; ++n) engine.step(s);
    CHECK(max_deviation(s.positions, t.rest_positions) < 1e-9);
    CHECK(engine.steps_taken() == 100);
    CHECK(engine.time() == Approx(0.01));
  }
}

TEST_CASE("a stretched spring oscillates at the two-body frequency") {
  const double k = 50.0, m = 0.02, rest = 0.1;
  const DloTopology t = dumbbell(rest, k, m);
  EngineConfig c;
  c.dt = 1e-4;
  Engine engine(t, K::ExplicitEuler, c);
  DloState s = make_rest_state(t);
  s.positions[1].x = 1.1 * rest;

  std::vector<double> crossings;
  double last = s.positions[1].x - s.positions[0].x - rest;
  for (int n = 1; n <= 20000; ++n) {
    engine.step(s);
    const double now = s.positions[1].x - s.positions[0].x - rest;
    if (last > 0.0 && now <= 0.0) crossings.push_back(n * c.dt - c.dt * now / (now - last));
    last = now;
  }
  REQUIRE(crossings.size() >= 3);
  const double period = (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
  const double expected = std::sqrt(2.0 * k / m) / (2.0 * std::numbers::pi);
  CHECK(1.0 / period == Approx(expected).epsilon(0.05));
}

TEST_CASE("pinned nodes never move") {
  const DloTopology t = rope(straight(12, 0.05));
  EngineConfig c;
  c.dt = 1e-3;
  c.external_accel = {0, 0, -9.81};
  c.pbd_iterations = 2;
  c.pbd_stiffness = 0.5;
  c.collision_radius = 0.005;
  c.collision_stiffness = 10;
  c.pinned_nodes = {0, 1, 2, 34};
  Engine engine(t, K::Verlet, c);
  DloState s = make_rest_state(t);
  std::vector<Vector3> pull(t.node_count());
  pull[DloTopology::r_node(6)] = {0.0, 0.05, 0.0};
  for (int n = 0; n < 500; ++n) {
    engine.step(s, pull);
    for (std::size_t p : c.pinned_nodes) {
      CHECK(std::memcmp(&s.positions[p], &t.rest_positions[p], sizeof(Vector3)) == 0);
      CHECK(s.velocities[p] == Vector3{});
    }
  }
}

TEST_CASE("without constraints the engine is pure free fall") {
  const DloTopology t = rope(straight(6, 0.1), {0.0, 0.0, 0.0});
  for (K kind : {K::SymplecticEuler, K::Verlet, K::RungeKutta4, K::ForestRuth}) {
    CAPTURE(spec_of(kind).name);
    EngineConfig c;
    c.dt = 2e-3;
    c.external_accel = {0.5, 0.0, -9.81};
    Engine engine(t, kind, c);
    DloState s = make_rest_state(t);
    for (Vector3& v : s.velocities) v = {0.1, 0.2, 0.3};

    PhaseState flat;
    for (std::size_t n = 0; n < t.node_count(); ++n) {
      for (int axis = 0; axis < 3; ++axis) {
        flat.x.push_back(s.positions[n][axis]);
        flat.v.push_back(s.velocities[n][axis]);
      }
    }
    const AccelerationField gravity = [&](std::span<const double>, std::span<const double>, std::span<double> a) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = c.external_accel[static_cast<int>(i % 3)];
    };
    Stepper stepper(kind);
    stepper.init(gravity, flat, c.dt);

    for (int n = 0; n < 200; ++n) {
      engine.step(s);
      stepper.step(gravity, flat, c.dt);
    }
    bool same = true;
    for (std::size_t n = 0; n < t.node_count(); ++n) {
      for (int axis = 0; axis < 3; ++axis) {
        same = same && s.positions[n][axis] == flat.x[3 * n + axis] &&
               s.velocities[n][axis] == flat.v[3 * n + axis];
      }
    }
    CHECK(same);
  }
}

TEST_CASE("stages run in order and the accumulator is consumed once") {
  const DloTopology t = rope(straight(8, 0.05));
  EngineConfig c;
  c.pbd_iterations = 1;
  c.collision_radius = 0.005;
  c.collision_stiffness = 10;
  Engine engine(t, K::SymplecticEuler, c);
  DloState s = make_rest_state(t);
  s.force_accumulator[5] = {0.0, 0.01, 0.0};

  std::vector<Stage> trace;
  bool cleared = true;
  engine.set_stage_observer([&](Stage stage, const DloState& state) {
    trace.push_back(stage);
    if (stage == Stage::integrate || stage == Stage::approximate_forces || stage == Stage::correct_positions) {
      Vector3 sum;
      for (const Vector3& f : state.force_accumulator) sum += f;
      cleared = cleared && sum == Vector3{};
    }
  });
  engine.step(s);
  engine.step(s);
  const std::vector<Stage> expected{Stage::integrate,         Stage::approximate_forces, Stage::correct_positions,
                                    Stage::resolve_collisions, Stage::integrate,         Stage::approximate_forces,
                                    Stage::correct_positions,  Stage::resolve_collisions};
  CHECK(trace == expected);
  CHECK(cleared);

  DloState with = make_rest_state(t), without = make_rest_state(t);
  with.force_accumulator[5] = {0.0, 0.01, 0.0};
  EngineConfig plain;
  Engine a(t, K::SymplecticEuler, plain), b(t, K::SymplecticEuler, plain);
  a.step(with);
  b.step(without);
  CHECK(with.velocities[5].y == Approx(plain.dt * 0.01 / t.masses[5]));
  CHECK(without.velocities[5].y == 0.0);
}

TEST_CASE("approximated forces are mass times velocity change over dt") {
  const DloTopology t = rope(straight(6, 0.05));
  EngineConfig c;
  c.dt = 1e-3;
  c.external_accel = {0, 0, -9.81};
  Engine engine(t, K::SymplecticEuler, c);
  DloState s = make_rest_state(t);
  const FrameReport r = engine.step(s);
  for (std::size_t n = 0; n < t.node_count(); ++n) {
    CHECK(r.approximated_forces[n].z == Approx(-9.81 * t.masses[n]).epsilon(1e-9));
  }
  CHECK(r.kinetic_energy > 0.0);
  CHECK(r.max_stretch == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sagging rope pinned at both ends settles") {
  const DloTopology t = rope(straight(11, 0.05));
  EngineConfig c;
  c.dt = 1e-3;
  c.pbd_iterations = 2;
  c.pbd_stiffness = 0.5;
  c.external_accel = {0, 0, -9.81};
  c.pinned_nodes = {0, 1, 2, 30, 31, 32};
  Engine engine(t, K::SymplecticEuler, c);
  DloState s = make_rest_state(t);
  FrameReport r;
  for (int n = 0; n < 30000; ++n) r = engine.step(s);
  CHECK(r.kinetic_energy < 1e-6);
  // Regression baseline for the midpoint sag.
  CHECK(s.positions[DloTopology::r_node(5)].z == Approx(-0.0079836).epsilon(1e-4));
  CHECK(s.positions[DloTopology::r_node(5)].z < 0.0);
}

TEST_CASE("spring projection") {
  SUBCASE("zero iterations is a no-op") {
    const DloTopology t = rope(straight(5, 0.1));
    DloState s = make_rest_state(t);
    for (Vector3& p : s.positions) p.x *= 1.3;
    const DloState before = s;
    EngineConfig c;
    pbd_project_springs(t, s, c);
    CHECK(s.positions == before.positions);
    CHECK(s.velocities == before.velocities);
  }
  SUBCASE("one full projection satisfies a single spring and keeps the centre of mass") {
    const DloTopology t = dumbbell(0.1, 10.0, 0.3);
    DloState s = make_rest_state(t);
    s.positions[1] = {0.2, 0.05, -0.02};
    const Vector3 com = 0.5 * (s.positions[0] + s.positions[1]);
    EngineConfig c;
    c.pbd_iterations = 1;
    c.pbd_stiffness = 1.0;
    c.dt = 0.01;
    pbd_project_springs(t, s, c);
    CHECK(std::abs(norm(s.positions[1] - s.positions[0]) - 0.1) < 1e-15);
    CHECK(norm(0.5 * (s.positions[0] + s.positions[1]) - com) < 1e-12);
    CHECK(norm(s.velocities[0] + s.velocities[1]) < 1e-10);
  }
  SUBCASE("a pinned end does not move") {
    const DloTopology t = dumbbell(0.1, 10.0, 0.3);
    DloState s = make_rest_state(t);
    s.positions[1] = {0.3, 0, 0};
    EngineConfig c;
    c.pbd_iterations = 1;
    c.pinned_nodes = {0};
    pbd_project_springs(t, s, c);
    CHECK(s.positions[0] == Vector3{});
    CHECK(s.positions[1].x == Approx(0.1));
  }
  SUBCASE("more iterations relax a stretched chain further") {
    DloTopology t;
    for (std::size_t k = 0; k <= 10; ++k) t.rest_positions.push_back({0.1 * static_cast<double>(k), 0, 0});
    t.spine = t.rest_positions;
    t.masses.assign(11, 0.01);
    for (std::size_t k = 0; k < 10; ++k) t.springs.push_back({k, k + 1, 0.1, 1.0});
    DloState stretched = make_rest_state(t);
    for (Vector3& p : stretched.positions) p.x *= 1.5;
    const auto after = [&](int iterations) {
      DloState s = stretched;
      EngineConfig c;
      c.pbd_iterations = iterations;
      c.pbd_stiffness = 0.8;
      pbd_project_springs(t, s, c);
      return max_stretch_ratio(t, s.positions);
    };
    CHECK(after(1) < 1.5);
    CHECK(after(5) < after(1));
  }
}

TEST_CASE("collision response") {
  SUBCASE("a straight rope has no contacts") {
    const DloTopology t = rope(straight(20, 0.05));
    DloState s = make_rest_state(t);
    EngineConfig c;
    c.collision_radius = 0.01;
    c.collision_stiffness = 5;
    CHECK(resolve_collisions(t, s, c).empty());
    for (const Vector3& f : s.force_accumulator) CHECK(f == Vector3{});
  }
  SUBCASE("close parallel segments are pushed apart") {
    const double r = 0.01;
    const std::vector<Vector3> path{{0, 0, 0},  {1, 0, 0},    {1, -1, 0},  {-1, -1, 0},
                                    {-1, r, 0}, {-0.5, r, 0}, {0.5, r, 0}};
    const DloTopology t = rope(straight(path.size(), 0.1));
    DloState s = make_rest_state(t);
    for (std::size_t k = 0; k < path.size(); ++k) s.positions[DloTopology::r_node(k)] = path[k];
    s.velocities[DloTopology::r_node(5)] = {0, -0.3, 0};
    EngineConfig c;
    c.collision_radius = r;
    c.collision_stiffness = 5;
    const auto pairs = resolve_collisions(t, s, c);
    REQUIRE(pairs.size() == 1);
    const auto& x = s.positions;
    const double d = oracle::segment_distance(x[DloTopology::r_node(0)], x[DloTopology::r_node(1)],
                                              x[DloTopology::r_node(5)], x[DloTopology::r_node(6)]);
    CHECK(d >= 2 * r - 1e-12);
    // Approaching normal velocity is removed: the upper segment no longer moves down
    // relative to the lower one.
    const auto& v = s.velocities;
    const double closing = 0.5 * (v[DloTopology::r_node(5)].y + v[DloTopology::r_node(6)].y) -
                           0.5 * (v[DloTopology::r_node(0)].y + v[DloTopology::r_node(1)].y);
    CHECK(closing >= -1e-12);
    Vector3 push;
    for (std::size_t k : {5, 6}) push += s.force_accumulator[DloTopology::r_node(k)];
    CHECK(push.y == Approx(5 * r));
    Vector3 total;
    for (const Vector3& f : s.force_accumulator) total += f;
    CHECK(norm(total) < 1e-12);
  }
  SUBCASE("non-positive radius is rejected") {
    const DloTopology t = rope(straight(5, 0.1));
    DloState s = make_rest_state(t);
    CHECK_THROWS_AS(resolve_collisions(t, s, EngineConfig{}), PreconditionError);
  }
}

TEST_CASE("serial and parallel kernels drive identical trajectories") {
  const std::vector<Vector3> spine = hairpin_spine(40, 0.02, 0.03);
  TopologyParams p;
  p.stiffness = {20.0, 0.02, 2.0};
  p.mass_total = 0.05;
  const DloTopology t = build_topology(spine, p);
  const auto run = [&](KernelMode mode) {
    EngineConfig c;
    c.dt = 5e-4;
    c.kernel = mode;
    c.pbd_iterations = 2;
    c.pbd_stiffness = 0.5;
    c.collision_radius = 0.016;
    c.collision_stiffness = 10;
    c.external_accel = {0, 0, -9.81};
    Engine engine(t, K::SymplecticEuler, c);
    DloState s = make_rest_state(t);
    std::size_t contacts = 0;
    for (int n = 0; n < 200; ++n) contacts += engine.step(s).collision_pairs;
    return std::pair(s, contacts);
  };
  const auto [serial, serial_contacts] = run(KernelMode::serial);
  const auto [parallel, parallel_contacts] = run(KernelMode::parallel);
  CHECK(serial_contacts > 0);
  CHECK(serial_contacts == parallel_contacts);
  CHECK(bitwise_equal(serial.positions, parallel.positions));
  CHECK(bitwise_equal(serial.velocities, parallel.velocities));
}

TEST_CASE("divergence is reported with the step index") {
  const DloTopology t = rope(straight(10, 0.05), {2000.0, 0.0, 0.0});
  EngineConfig c;
  c.dt = 0.05;
  Engine engine(t, K::ExplicitEuler, c);
  DloState s = make_rest_state(t);
  s.positions[DloTopology::r_node(9)].x += 0.01;
  std::size_t reached = 0;
  try {
    for (reached = 0; reached < 100000; ++reached) engine.step(s);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == reached + 1);
  } catch (const GeometryError&) {
    // Collapsed geometry is also an acceptable failure mode for a blown-up rope.
  }
}

TEST_CASE("energy diagnostics") {
  const DloTopology t = rope(straight(6, 0.05));
  DloState s = make_rest_state(t);
  CHECK(kinetic_energy(t, s) == 0.0);
  for (Vector3& v : s.velocities) v = {1, 0, 0};
  CHECK(kinetic_energy(t, s) == Approx(0.5 * 0.05));
  const Vector3 g{0, 0, -9.81};
  double rest = 0.0;
  for (std::size_t n = 0; n < t.node_count(); ++n) rest += t.masses[n] * 9.81 * t.rest_positions[n].z;
  CHECK(potential_energy(t, s, g) == Approx(rest));
  for (Vector3& p : s.positions) p.z += 1.0;
  CHECK(potential_energy(t, s, g) == Approx(rest + 0.05 * 9.81));
}
