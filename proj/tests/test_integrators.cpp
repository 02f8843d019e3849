#include <doctest.h>

#include <cstring>
#include <limits>

#include "dlo/errors.hpp"
#include "dlo/integrators.hpp"
#include "oracles.hpp"

using namespace dlo;
using doctest::Approx;

namespace {

using K = IntegratorKind;

const AccelerationField harmonic = [](std::span<const double> x, std::span<const double>, std::span<double> a) {
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = -x[i];
};

const AccelerationField pendulum = [](std::span<const double> x, std::span<const double>, std::span<double> a) {
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = -std::sin(x[i]);
};

const AccelerationField damped_pendulum = [](std::span<const double> x, std::span<const double> v,
                                             std::span<double> a) {
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = -std::sin(x[i]) - 0.1 * v[i];
};

PhaseState one(double x, double v) { return {{x}, {v}}; }

PhaseState advance(K kind, const AccelerationField& f, PhaseState s, double h, std::size_t steps) {
  Stepper stepper(kind);
  stepper.init(f, s, h);
  for (std::size_t n = 0; n < steps; ++n) stepper.step(f, s, h);
  return s;
}

}  // namespace

TEST_CASE("integrator table") {
  const auto all = all_integrators();
  REQUIRE(all.size() == 9);
  const K order[] = {K::ExplicitEuler, K::SymplecticEuler, K::Midpoint, K::HalfStep, K::Verlet,
                     K::ForestRuth, K::SymplecticMidpoint, K::RungeKutta4, K::ModifiedHalfStep};
  const int nominal[] = {1, 1, 2, 2, 2, 3, 2, 4, 2};
  const bool symplectic[] = {false, true, false, false, true, true, true, false, false};
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(all[i].kind == order[i]);
    CHECK(all[i].nominal_order == nominal[i]);
    CHECK(all[i].symplectic == symplectic[i]);
    CHECK(parse_integrator(all[i].name) == order[i]);
    CHECK(&spec_of(order[i]) == &all[i]);
  }
  CHECK_THROWS_AS(parse_integrator("symplecticeuler"), PreconditionError);
  CHECK_THROWS_AS(parse_integrator("Leapfrog"), PreconditionError);
}

TEST_CASE("single steps on x'' = -x by hand") {
  struct Case {
    K kind;
    double x, v;
  };
  // x = 1, v = 0, h = 0.1
  const Case cases[] = {
      {K::SymplecticEuler, 0.99, -0.1},
      {K::SymplecticMidpoint, 0.995, -0.05},
      {K::ModifiedHalfStep, 0.995, -0.09975},
      {K::ExplicitEuler, 1.0, -0.1},
      {K::HalfStep, 0.995, -0.1},
      {K::Midpoint, 0.995, -0.1},
  };
  for (const Case& c : cases) {
    CAPTURE(spec_of(c.kind).name);
    const PhaseState s = advance(c.kind, harmonic, one(1.0, 0.0), 0.1, 1);
    CHECK(s.x[0] == Approx(c.x).epsilon(1e-14));
    CHECK(s.v[0] == Approx(c.v).epsilon(1e-14));
  }
}

TEST_CASE("symplectic midpoint keeps kicking by a full step after the first") {
  PhaseState s = one(1.0, 0.0);
  Stepper stepper(K::SymplecticMidpoint);
  stepper.init(harmonic, s, 0.1);
  stepper.step(harmonic, s, 0.1);
  stepper.step(harmonic, s, 0.1);
  // v = -0.05 - 0.1·0.995, x = 0.995 + 0.1·v
  CHECK(s.v[0] == Approx(-0.1495).epsilon(1e-14));
  CHECK(s.x[0] == Approx(0.98005).epsilon(1e-14));
}

TEST_CASE("Verlet bootstrap") {
  const StepperAux aux = init_aux(K::Verlet, harmonic, one(1.0, 0.0), 0.1);
  REQUIRE(aux.previous_x.size() == 1);
  CHECK(aux.previous_x[0] == Approx(0.995).epsilon(1e-15));
  CHECK(init_aux(K::ExplicitEuler, harmonic, one(1.0, 0.0), 0.1).previous_x.empty());
  CHECK(init_aux(K::RungeKutta4, harmonic, one(1.0, 0.0), 0.1).steps == 0);

  PhaseState s = one(1.0, 0.0);
  Stepper uninitialised(K::Verlet);
  CHECK_THROWS_AS(uninitialised.step(harmonic, s, 0.1), PreconditionError);
}

TEST_CASE("Verlet first step agrees with velocity Verlet to third order") {
  double previous = 0.0;
  for (double h : {4e-3, 2e-3, 1e-3}) {
    PhaseState s = one(1.0, 0.3);
    const double a0 = -std::sin(1.0) - 0.1 * 0.3;
    const double reference = 1.0 + h * 0.3 + 0.5 * h * h * a0;
    s = advance(K::Verlet, damped_pendulum, s, h, 1);
    const double diff = std::abs(s.x[0] - reference);
    CHECK(diff < 10.0 * h * h * h);
    if (previous > 0.0) CHECK(previous / diff == Approx(8.0).epsilon(0.05));
    previous = diff;
  }
}

TEST_CASE("force evaluations per step") {
  for (const IntegratorSpec& spec : all_integrators()) {
    CAPTURE(spec.name);
    int calls = 0;
    const AccelerationField counted = [&](std::span<const double> x, std::span<const double> v,
                                          std::span<double> a) {
      ++calls;
      harmonic(x, v, a);
    };
    PhaseState s = one(1.0, 0.0);
    Stepper stepper(spec.kind);
    stepper.init(counted, s, 0.01);
    calls = 0;
    for (int n = 0; n < 10; ++n) stepper.step(counted, s, 0.01);
    CHECK(calls == 10 * spec.evaluations_per_step);
  }
  CHECK(spec_of(K::ExplicitEuler).evaluations_per_step == 1);
  CHECK(spec_of(K::SymplecticEuler).evaluations_per_step == 1);
  CHECK(spec_of(K::SymplecticMidpoint).evaluations_per_step == 1);
  CHECK(spec_of(K::Verlet).evaluations_per_step == 1);
  CHECK(spec_of(K::Midpoint).evaluations_per_step == 2);
  CHECK(spec_of(K::HalfStep).evaluations_per_step == 2);
  CHECK(spec_of(K::ModifiedHalfStep).evaluations_per_step == 2);
  CHECK(spec_of(K::ForestRuth).evaluations_per_step == 3);
  CHECK(spec_of(K::RungeKutta4).evaluations_per_step == 4);
}

TEST_CASE("trajectories are bit-reproducible") {
  for (const IntegratorSpec& spec : all_integrators()) {
    PhaseState a{{1.0, -0.4, 2.0}, {0.0, 0.3, -0.1}};
    PhaseState b = a;
    a = advance(spec.kind, damped_pendulum, a, 0.05, 5000);
    b = advance(spec.kind, damped_pendulum, b, 0.05, 5000);
    CHECK(std::memcmp(a.x.data(), b.x.data(), 3 * sizeof(double)) == 0);
    CHECK(std::memcmp(a.v.data(), b.v.data(), 3 * sizeof(double)) == 0);
  }
}

TEST_CASE("free function and stepper forms agree") {
  for (const IntegratorSpec& spec : all_integrators()) {
    PhaseState a = one(0.7, 0.2), b = a;
    StepperAux aux = init_aux(spec.kind, pendulum, b, 0.1);
    a = advance(spec.kind, pendulum, a, 0.1, 50);
    for (int n = 0; n < 50; ++n) step(spec.kind, pendulum, b, 0.1, aux);
    CHECK(a.x[0] == b.x[0]);
    CHECK(a.v[0] == b.v[0]);
  }
}

TEST_CASE("Verlet and Forest-Ruth are time reversible on the pendulum") {
  for (K kind : {K::Verlet, K::ForestRuth}) {
    CAPTURE(spec_of(kind).name);
    const double h = 0.05;
    PhaseState s = one(1.0, 0.0);
    Stepper stepper(kind);
    stepper.init(pendulum, s, h);
    for (int n = 0; n < 1000; ++n) stepper.step(pendulum, s, h);
    CHECK(std::abs(s.x[0] - 1.0) > 0.1);
    stepper.reverse(pendulum, s, h);
    for (int n = 0; n < 1000; ++n) stepper.step(pendulum, s, h);
    CHECK(std::abs(s.x[0] - 1.0) < 1e-6);
    if (kind == K::ForestRuth) CHECK(std::abs(s.v[0]) < 1e-6);
  }
}

TEST_CASE("symplectic schemes keep pendulum energy in a band over a million steps") {
  for (const IntegratorSpec& spec : all_integrators()) {
    if (!spec.symplectic) continue;
    CAPTURE(spec.name);
    PhaseState s = one(1.0, 0.0);
    const double h0 = oracle::pendulum_energy(1.0, 0.0);
    Stepper stepper(spec.kind);
    stepper.init(pendulum, s, 0.1);
    std::vector<double> error;
    error.reserve(1000000);
    double worst = 0.0;
    for (int n = 0; n < 1000000; ++n) {
      stepper.step(pendulum, s, 0.1);
      const double e = oracle::pendulum_energy(s.x[0], s.v[0]) - h0;
      worst = std::max(worst, std::abs(e));
      error.push_back(e);
    }
    CHECK(worst < 0.05);
    CHECK(std::abs(oracle::slope(error)) < 1e-9);
  }
}

TEST_CASE("explicit Euler injects energy at every step of a small swing") {
  PhaseState s = one(0.01, 0.0);
  Stepper stepper(K::ExplicitEuler);
  stepper.init(pendulum, s, 0.03);
  double last = oracle::pendulum_energy(s.x[0], s.v[0]);
  bool increasing = true;
  for (int n = 0; n < 10000; ++n) {
    stepper.step(pendulum, s, 0.03);
    const double e = oracle::pendulum_energy(s.x[0], s.v[0]);
    increasing = increasing && e > last;
    last = e;
  }
  CHECK(increasing);

  const PhaseState wide = advance(K::ExplicitEuler, pendulum, one(1.0, 0.0), 0.03, 10000);
  CHECK(oracle::pendulum_energy(wide.x[0], wide.v[0]) > oracle::pendulum_energy(1.0, 0.0) + 0.5);
}

TEST_CASE("convergence orders on the harmonic oscillator") {
  const std::vector<double> hs{0.1, 0.05, 0.025, 0.0125};
  const auto exact = [](double t) { return std::vector<double>{std::cos(t)}; };
  const auto order = [&](K kind) { return measured_order(kind, harmonic, one(1.0, 0.0), exact, 1.0, hs); };
  CHECK(order(K::ExplicitEuler) == Approx(1.0).epsilon(0.2));
  CHECK(order(K::SymplecticEuler) == Approx(1.0).epsilon(0.3));
  CHECK(order(K::Midpoint) == Approx(2.0).epsilon(0.15));
  CHECK(order(K::HalfStep) == Approx(2.0).epsilon(0.15));
  CHECK(order(K::ModifiedHalfStep) == Approx(2.0).epsilon(0.15));
  CHECK(order(K::Verlet) == Approx(2.0).epsilon(0.15));
  CHECK(order(K::SymplecticMidpoint) >= 1.7);
  CHECK(order(K::ForestRuth) >= 3.0);
  CHECK(order(K::RungeKutta4) == Approx(4.0).epsilon(0.075));
}

TEST_CASE("measured_order preconditions") {
  const auto exact = [](double t) { return std::vector<double>{std::cos(t)}; };
  const std::vector<double> two{0.1, 0.05};
  const std::vector<double> uneven{0.1, 0.05, 0.02};
  CHECK_THROWS_AS(measured_order(K::Verlet, harmonic, one(1, 0), exact, 1.0, two), PreconditionError);
  CHECK_THROWS_AS(measured_order(K::Verlet, harmonic, one(1, 0), exact, 1.0, uneven), PreconditionError);
}

TEST_CASE("half-step variants differ only through the midpoint position") {
  // Position-only field: the two schemes agree to third order in one step.
  double previous = 0.0;
  for (double h : {0.04, 0.02, 0.01}) {
    const PhaseState a = advance(K::HalfStep, pendulum, one(1.0, 0.5), h, 1);
    const PhaseState b = advance(K::ModifiedHalfStep, pendulum, one(1.0, 0.5), h, 1);
    CHECK(a.x[0] == b.x[0]);
    const double dv = std::abs(a.v[0] - b.v[0]);
    CHECK(dv > 0.0);
    CHECK(dv < h * h);
    if (previous > 0.0) CHECK(previous / dv > 7.0);
    previous = dv;
  }
  const PhaseState c = advance(K::HalfStep, damped_pendulum, one(1.0, 0.5), 0.1, 100);
  const PhaseState d = advance(K::ModifiedHalfStep, damped_pendulum, one(1.0, 0.5), 0.1, 100);
  CHECK(std::abs(c.x[0] - d.x[0]) > 1e-6);
}

TEST_CASE("divergence carries the step index") {
  const AccelerationField wild = [](std::span<const double> x, std::span<const double>, std::span<double> a) {
    a[0] = 1e308 * x[0];
  };
  PhaseState s = one(1.0, 0.0);
  Stepper stepper(K::ExplicitEuler);
  stepper.init(wild, s, 1.0);
  stepper.step(wild, s, 1.0);
  try {
    stepper.step(wild, s, 1.0);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 2);
  }
  CHECK_THROWS_AS(stepper.step(harmonic, s, 0.0), PreconditionError);
  CHECK_THROWS_AS(stepper.step(harmonic, s, -0.1), PreconditionError);
}

TEST_CASE("Verlet memory follows external corrections") {
  const double h = 0.01;
  PhaseState s = one(0.5, 0.2);
  Stepper stepper(K::Verlet);
  stepper.init(pendulum, s, h);
  for (int n = 0; n < 10; ++n) stepper.step(pendulum, s, h);
  const double implied = (s.x[0] - stepper.aux().previous_x[0]) / h;
  const std::vector<double> dx{0.03}, dv{0.0};
  s.x[0] += dx[0];
  stepper.apply_correction(dx, dv, h);
  CHECK((s.x[0] - stepper.aux().previous_x[0]) / h == Approx(implied).epsilon(1e-12));

  const std::vector<double> dx2{0.0}, dv2{0.5};
  s.v[0] += 0.5;
  stepper.apply_correction(dx2, dv2, h);
  CHECK((s.x[0] - stepper.aux().previous_x[0]) / h == Approx(implied + 0.5).epsilon(1e-12));
}

TEST_CASE("scheme memory round-trips through JSON") {
  PhaseState s{{0.1, 0.2}, {0.0, 0.0}};
  Stepper a(K::Verlet);
  a.init(pendulum, s, 0.05);
  for (int n = 0; n < 7; ++n) a.step(pendulum, s, 0.05);
  PhaseState resumed = s;

  Stepper b(K::Verlet);
  b.set_aux(aux_from_json(aux_to_json(a.aux())));
  CHECK(b.aux().steps == 7);
  CHECK(b.aux().previous_x == a.aux().previous_x);
  for (int n = 0; n < 20; ++n) {
    a.step(pendulum, s, 0.05);
    b.step(pendulum, resumed, 0.05);
  }
  CHECK(s.x == resumed.x);
  CHECK(s.v == resumed.v);
  CHECK_THROWS_AS(aux_from_json("{\"steps\": 1}"), PreconditionError);
  CHECK_THROWS_AS(aux_from_json("not json"), PreconditionError);
}
