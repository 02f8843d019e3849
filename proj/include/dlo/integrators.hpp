#pragma once

// Fixed-step explicit integrators for second-order systems x'' = f(x, v).
//
// State is a flat vector of generalized coordinates (3 per node for the rope, 1 for the
// pendulum). Every scheme advances (x, v) in place; schemes that need memory across
// steps keep it in StepperAux.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dlo {

enum class IntegratorKind {
  ExplicitEuler,
  SymplecticEuler,
  Midpoint,
  HalfStep,
  Verlet,
  ForestRuth,
  SymplecticMidpoint,
  RungeKutta4,
  ModifiedHalfStep,
};

struct IntegratorSpec {
  IntegratorKind kind;
  std::string_view name;
  std::string_view display_name;
  int nominal_order;
  bool symplectic;
  int evaluations_per_step;
};

const IntegratorSpec& spec_of(IntegratorKind kind);
/// The nine schemes in benchmark-table order.
std::span<const IntegratorSpec> all_integrators();
/// Canonical enum spelling, e.g. "SymplecticEuler". Throws PreconditionError otherwise.
IntegratorKind parse_integrator(std::string_view name);

struct PhaseState {
  std::vector<double> x;
  std::vector<double> v;
};

/// a = f(x, v). Must be deterministic and autonomous.
using AccelerationField =
    std::function<void(std::span<const double> x, std::span<const double> v, std::span<double> a)>;

/// Scheme-private memory. Verlet keeps the previous position; SymplecticMidpoint uses the
/// step count to apply its half kick only on the first step.
struct StepperAux {
  std::vector<double> previous_x;
  std::uint64_t steps = 0;
};

std::string aux_to_json(const StepperAux& aux);
StepperAux aux_from_json(const std::string& text);

class Stepper {
 public:
  explicit Stepper(IntegratorKind kind);

  const IntegratorSpec& spec() const { return *spec_; }
  const StepperAux& aux() const { return aux_; }
  void set_aux(StepperAux aux) { aux_ = std::move(aux); }

  /// Must be called before the first step and whenever the step size changes.
  /// Verlet bootstraps previous_x = x - h·v + (h²/2)·f(x, v).
  void init(const AccelerationField& f, const PhaseState& s, double h);

  /// One step of size h > 0. Throws DivergenceError (carrying the step index) when the
  /// new state is not finite.
  void step(const AccelerationField& f, PhaseState& s, double h);

  /// Informs the stepper that something outside the integrator moved the state by
  /// (dx, dv) after the last step, so schemes with memory stay consistent.
  void apply_correction(std::span<const double> dx, std::span<const double> dv, double h);

  /// Flips the direction of time: negates v and reflects the scheme memory.
  void reverse(const AccelerationField& f, PhaseState& s, double h);

 private:
  void ensure_scratch(std::size_t n);

  const IntegratorSpec* spec_;
  StepperAux aux_;
  std::array<std::vector<double>, 8> scratch_;
};

/// Free-function form of Stepper::init.
StepperAux init_aux(IntegratorKind kind, const AccelerationField& f, const PhaseState& s, double h);

/// Free-function form of Stepper::step.
void step(IntegratorKind kind, const AccelerationField& f, PhaseState& s, double h, StepperAux& aux);

/// Global error exponent: least-squares slope of log(max |x - x_exact(t_end)|) against
/// log(h). The h values must each halve the previous one (at least three).
double measured_order(IntegratorKind kind, const AccelerationField& f, const PhaseState& initial,
                      const std::function<std::vector<double>(double)>& exact_position,
                      double t_end, std::span<const double> h_list);

}  // namespace dlo
