#include "dlo/integrators.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "dlo/errors.hpp"

namespace dlo {

namespace {

constexpr std::array<IntegratorSpec, 9> kSpecs{{
    {IntegratorKind::ExplicitEuler, "ExplicitEuler", "Explicit Euler", 1, false, 1},
    {IntegratorKind::SymplecticEuler, "SymplecticEuler", "Symplectic Euler", 1, true, 1},
    {IntegratorKind::Midpoint, "Midpoint", "Midpoint", 2, false, 2},
    {IntegratorKind::HalfStep, "HalfStep", "Half-Step", 2, false, 2},
    {IntegratorKind::Verlet, "Verlet", "Verlet", 2, true, 1},
    {IntegratorKind::ForestRuth, "ForestRuth", "Forest-Ruth", 3, true, 3},
    {IntegratorKind::SymplecticMidpoint, "SymplecticMidpoint", "Symplectic Midpoint", 2, true, 1},
    {IntegratorKind::RungeKutta4, "RungeKutta4", "Runge-Kutta 4", 4, false, 4},
    {IntegratorKind::ModifiedHalfStep, "ModifiedHalfStep", "Modified Half-Step", 2, false, 2},
}};

// Forest-Ruth composition weight θ = 1 / (2 - 2^(1/3)).
const double kForestRuthTheta = 1.0 / (2.0 - std::cbrt(2.0));

void axpy(std::span<double> y, double a, std::span<const double> x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// out = x + a·d
void shifted(std::span<double> out, std::span<const double> x, double a, std::span<const double> d) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + a * d[i];
}

bool all_finite(const PhaseState& s) {
  const auto finite = [](double value) { return std::isfinite(value); };
  return std::all_of(s.x.begin(), s.x.end(), finite) && std::all_of(s.v.begin(), s.v.end(), finite);
}

}  // namespace

const IntegratorSpec& spec_of(IntegratorKind kind) { return kSpecs[static_cast<std::size_t>(kind)]; }

std::span<const IntegratorSpec> all_integrators() { return kSpecs; }

IntegratorKind parse_integrator(std::string_view name) {
  for (const IntegratorSpec& s : kSpecs) {
    if (s.name == name) return s.kind;
  }
  throw PreconditionError("unknown integrator '" + std::string(name) + "'");
}

std::string aux_to_json(const StepperAux& aux) {
  return nlohmann::json{{"previous_x", aux.previous_x}, {"steps", aux.steps}}.dump();
}

StepperAux aux_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return {j.at("previous_x").get<std::vector<double>>(), j.at("steps").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("stepper aux: ") + e.what());
  }
}

Stepper::Stepper(IntegratorKind kind) : spec_(&spec_of(kind)) {}

void Stepper::ensure_scratch(std::size_t n) {
  for (auto& buffer : scratch_) buffer.resize(n);
}

void Stepper::init(const AccelerationField& f, const PhaseState& s, double h) {
  aux_ = {};
  if (spec_->kind != IntegratorKind::Verlet) return;
  ensure_scratch(s.x.size());
  std::vector<double>& a = scratch_[0];
  f(s.x, s.v, a);
  aux_.previous_x.resize(s.x.size());
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    aux_.previous_x[i] = s.x[i] - h * s.v[i] + 0.5 * h * h * a[i];
  }
}

void Stepper::step(const AccelerationField& f, PhaseState& s, double h) {
  if (!(h > 0.0)) throw PreconditionError("step: h must be positive");
  const std::size_t n = s.x.size();
  ensure_scratch(n);
  auto& a = scratch_[0];
  auto& xm = scratch_[1];
  auto& vm = scratch_[2];
  std::span<double> x = s.x;
  std::span<double> v = s.v;

  switch (spec_->kind) {
    case IntegratorKind::ExplicitEuler:
      f(x, v, a);
      axpy(x, h, v);
      axpy(v, h, a);
      break;

    case IntegratorKind::SymplecticEuler:
      f(x, v, a);
      axpy(v, h, a);
      axpy(x, h, v);
      break;

    case IntegratorKind::Midpoint:
      f(x, v, a);
      shifted(xm, x, 0.5 * h, v);
      shifted(vm, v, 0.5 * h, a);
      f(xm, vm, a);
      axpy(v, h, a);
      axpy(x, h, vm);
      break;

    case IntegratorKind::HalfStep:
    case IntegratorKind::ModifiedHalfStep: {
      f(x, v, a);
      shifted(vm, v, 0.5 * h, a);
      // The modified variant advances the midpoint position with the midpoint velocity.
      const bool modified = spec_->kind == IntegratorKind::ModifiedHalfStep;
      shifted(xm, x, 0.5 * h, modified ? std::span<const double>(vm) : std::span<const double>(v));
      f(xm, vm, a);
      axpy(v, h, a);
      axpy(x, h, vm);
      break;
    }

    case IntegratorKind::SymplecticMidpoint:
      // The stored velocity lives at the half steps: the first kick covers h/2, the rest h.
      f(x, v, a);
      axpy(v, aux_.steps == 0 ? 0.5 * h : h, a);
      axpy(x, h, v);
      break;

    case IntegratorKind::Verlet: {
      if (aux_.previous_x.size() != n) throw PreconditionError("Verlet: init() not called");
      auto& x_prev = aux_.previous_x;
      auto& v_est = scratch_[3];
      for (std::size_t i = 0; i < n; ++i) v_est[i] = (x[i] - x_prev[i]) / h;
      f(x, v_est, a);
      for (std::size_t i = 0; i < n; ++i) {
        const double next = 2.0 * x[i] - x_prev[i] + h * h * a[i];
        v[i] = (3.0 * next - 4.0 * x[i] + x_prev[i]) / (2.0 * h);
        x_prev[i] = x[i];
        x[i] = next;
      }
      break;
    }

    case IntegratorKind::ForestRuth: {
      const double theta = kForestRuthTheta;
      const double drift[4] = {0.5 * theta, 0.5 * (1.0 - theta), 0.5 * (1.0 - theta), 0.5 * theta};
      const double kick[3] = {theta, 1.0 - 2.0 * theta, theta};
      for (int stage = 0; stage < 3; ++stage) {
        axpy(x, drift[stage] * h, v);
        f(x, v, a);
        axpy(v, kick[stage] * h, a);
      }
      axpy(x, drift[3] * h, v);
      break;
    }

    case IntegratorKind::RungeKutta4: {
      auto& k2 = scratch_[3];
      auto& k3 = scratch_[4];
      auto& k4 = scratch_[5];
      auto& v2 = scratch_[6];
      auto& v3 = scratch_[7];
      f(x, v, a);                    // k1v = a, k1x = v
      shifted(xm, x, 0.5 * h, v);    // x2
      shifted(v2, v, 0.5 * h, a);    // v2 = k2x
      f(xm, v2, k2);                 // k2v
      shifted(xm, x, 0.5 * h, v2);   // x3
      shifted(v3, v, 0.5 * h, k2);   // v3 = k3x
      f(xm, v3, k3);                 // k3v
      shifted(xm, x, h, v3);         // x4
      shifted(vm, v, h, k3);         // v4 = k4x
      f(xm, vm, k4);                 // k4v
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + vm[i]);
        v[i] += h / 6.0 * (a[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
      break;
    }
  }

  ++aux_.steps;
  if (!all_finite(s)) {
    throw DivergenceError(aux_.steps, std::string(spec_->name) + ": non-finite state at step " +
                                          std::to_string(aux_.steps));
  }
}

void Stepper::apply_correction(std::span<const double> dx, std::span<const double> dv, double h) {
  if (spec_->kind != IntegratorKind::Verlet) return;
  // Keep the implied velocity (x - x_prev)/h in step with the corrected state.
  for (std::size_t i = 0; i < aux_.previous_x.size(); ++i) aux_.previous_x[i] += dx[i] - h * dv[i];
}

void Stepper::reverse(const AccelerationField& f, PhaseState& s, double h) {
  for (double& value : s.v) value = -value;
  if (spec_->kind != IntegratorKind::Verlet) return;
  // The previous position of the reversed trajectory is the next forward position.
  const std::size_t n = s.x.size();
  ensure_scratch(n);
  auto& a = scratch_[0];
  auto& v_est = scratch_[3];
  for (std::size_t i = 0; i < n; ++i) v_est[i] = (s.x[i] - aux_.previous_x[i]) / h;
  f(s.x, v_est, a);
  for (std::size_t i = 0; i < n; ++i) {
    aux_.previous_x[i] = 2.0 * s.x[i] - aux_.previous_x[i] + h * h * a[i];
  }
}

StepperAux init_aux(IntegratorKind kind, const AccelerationField& f, const PhaseState& s, double h) {
  Stepper stepper(kind);
  stepper.init(f, s, h);
  return stepper.aux();
}

void step(IntegratorKind kind, const AccelerationField& f, PhaseState& s, double h, StepperAux& aux) {
  Stepper stepper(kind);
  stepper.set_aux(std::move(aux));
  stepper.step(f, s, h);
  aux = stepper.aux();
}

double measured_order(IntegratorKind kind, const AccelerationField& f, const PhaseState& initial,
                      const std::function<std::vector<double>(double)>& exact_position,
                      double t_end, std::span<const double> h_list) {
  if (h_list.size() < 3) throw PreconditionError("measured_order: need at least three step sizes");
  for (std::size_t i = 1; i < h_list.size(); ++i) {
    if (std::abs(h_list[i] - 0.5 * h_list[i - 1]) > 1e-12 * h_list[i - 1]) {
      throw PreconditionError("measured_order: each step size must halve the previous one");
    }
  }
  const std::vector<double> exact = exact_position(t_end);

  double sum_x = 0.0, sum_y = 0.0, sum_xx = 0.0, sum_xy = 0.0;
  for (double h : h_list) {
    const auto steps = static_cast<std::size_t>(std::llround(t_end / h));
    PhaseState s = initial;
    Stepper stepper(kind);
    stepper.init(f, s, h);
    for (std::size_t n = 0; n < steps; ++n) stepper.step(f, s, h);
    double error = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) error = std::max(error, std::abs(s.x[i] - exact[i]));
    const double lx = std::log(h);
    const double ly = std::log(error);
    sum_x += lx;
    sum_y += ly;
    sum_xx += lx * lx;
    sum_xy += lx * ly;
  }
  const double m = static_cast<double>(h_list.size());
  return (m * sum_xy - sum_x * sum_y) / (m * sum_xx - sum_x * sum_x);
}

}  // namespace dlo
