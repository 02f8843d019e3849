#pragma once

// Declarative run description read from JSON (format_version 1). Every object rejects
// keys it does not know; errors name the offending field.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dlo/benchmark.hpp"
#include "dlo/errors.hpp"
#include "dlo/integrators.hpp"

namespace dlo {

class ConfigError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

enum class ScenarioKind { pendulum, dlo, harmonic };

const char* to_string(ScenarioKind kind);

struct SpineGenerator {
  std::string kind = "straight";  // straight | hairpin
  std::size_t segments = 30;
  double length = 1.0;            // straight: total length, m
  double segment_length = 0.02;   // hairpin, m
  double gap = 0.02;              // hairpin leg separation, m
};

struct ScenarioConfig {
  int format_version = 1;
  ScenarioKind kind = ScenarioKind::dlo;
  std::vector<IntegratorKind> integrators{IntegratorKind::SymplecticEuler};
  double dt = 1e-3;                // s, simulate
  std::vector<double> phase_dts;   // s, phase; empty means {dt}
  double dt_lo = 1e-4;             // s, bench bisection bracket
  double dt_hi = 1.0;
  std::size_t steps = 1000;
  double initial_x = 1.0;          // pendulum / harmonic
  double initial_v = 0.0;

  std::optional<std::vector<Vector3>> spine;  // explicit rope spine
  SpineGenerator generator;
  DloScenarioParams rope = default_dlo_scenario();
  StabilityCriterion criterion;    // defaults depend on kind
  BenchmarkOptions bench;

  std::string output_dir = "out";
  std::uint64_t seed = 42;
};

/// Stability criterion defaults: 5000 steps and ceiling 10 for the rope, 10⁴ steps and
/// ceiling 2 for the scalar systems.
StabilityCriterion default_criterion(ScenarioKind kind);

/// Parses and validates. Throws ConfigError with a field path or line/column.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);
/// Fully resolved config; parse_config(config_to_json(c)) reproduces c.
std::string config_to_json(const ScenarioConfig& config);

/// Builds the probed system described by the config.
std::unique_ptr<BenchSystem> make_system(const ScenarioConfig& config);
DloScenarioParams resolved_rope(const ScenarioConfig& config);

}  // namespace dlo
