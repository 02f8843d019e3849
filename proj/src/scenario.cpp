#include "dlo/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace dlo {

namespace {

using nlohmann::json;

// Reads typed fields from one JSON object, remembering which keys were consumed so the
// rest can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where()));
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    const json* value = raw(key);
    if (!value) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!value->is_number()) throw ConfigError(fmt::format("{}: expected a number", field(key)));
      } else if constexpr (std::is_integral_v<T>) {
        if (!value->is_number_integer()) throw ConfigError(fmt::format("{}: expected an integer", field(key)));
        if constexpr (std::is_unsigned_v<T>) {
          if (value->get<long long>() < 0) throw ConfigError(fmt::format("{}: must be >= 0", field(key)));
        }
      }
      out = value->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("{}: {}", field(key), e.what()));
    }
  }

  ObjectReader child(const std::string& key) {
    const json* value = raw(key);
    static const json empty = json::object();
    return ObjectReader(value ? *value : empty, field(key));
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(fmt::format("{}: unknown key", field(key)));
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vector3 read_vector(const json& value, const std::string& field) {
  if (!value.is_array() || value.size() != 3 || !std::all_of(value.begin(), value.end(), [](const json& c) {
        return c.is_number();
      })) {
    throw ConfigError(fmt::format("{}: expected [x, y, z]", field));
  }
  return {value[0].get<double>(), value[1].get<double>(), value[2].get<double>()};
}

json write_vector(const Vector3& v) { return json::array({v.x, v.y, v.z}); }

ScenarioKind parse_kind(const std::string& name, const std::string& field) {
  if (name == "pendulum") return ScenarioKind::pendulum;
  if (name == "dlo") return ScenarioKind::dlo;
  if (name == "harmonic") return ScenarioKind::harmonic;
  throw ConfigError(fmt::format("{}: unknown scenario '{}' (pendulum, dlo, harmonic)", field, name));
}

KernelMode parse_kernel(const std::string& name, const std::string& field) {
  if (name == "serial") return KernelMode::serial;
  if (name == "parallel") return KernelMode::parallel;
  throw ConfigError(fmt::format("{}: unknown kernel '{}' (serial, parallel)", field, name));
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return fmt::format("line {}, column {}", line, column);
}

void read_rope(ObjectReader& r, ScenarioConfig& c) {
  DloScenarioParams& rope = c.rope;
  if (const json* spine = r.raw("spine")) {
    if (!spine->is_array()) throw ConfigError(r.field("spine") + ": expected a list of points");
    std::vector<Vector3> points;
    for (std::size_t i = 0; i < spine->size(); ++i) {
      points.push_back(read_vector((*spine)[i], fmt::format("{}[{}]", r.field("spine"), i)));
    }
    require(points.size() >= 3, r.field("spine") + ": need at least 3 points");
    c.spine = std::move(points);
  }
  if (r.has("generator")) {
    ObjectReader g = r.child("generator");
    g.read("kind", c.generator.kind);
    g.read("segments", c.generator.segments);
    g.read("length", c.generator.length);
    g.read("segment_length", c.generator.segment_length);
    g.read("gap", c.generator.gap);
    g.finish();
    require(c.generator.kind == "straight" || c.generator.kind == "hairpin",
            g.field("kind") + ": expected 'straight' or 'hairpin'");
    require(c.generator.segments >= 2, g.field("segments") + ": must be >= 2");
    require(c.generator.length > 0.0, g.field("length") + ": must be positive");
    require(c.generator.segment_length > 0.0, g.field("segment_length") + ": must be positive");
    require(c.generator.gap > 0.0, g.field("gap") + ": must be positive");
  }
  r.read("frame_scale", rope.topology.frame_scale);
  r.read("K_l", rope.topology.stiffness.spring);
  r.read("K_V", rope.topology.stiffness.volume);
  r.read("K_t", rope.topology.stiffness.torsion);
  r.read("mass", rope.topology.mass_total);
  if (const json* mode = r.raw("volume_mode")) {
    try {
      rope.topology.volume_mode = parse_volume_mode(mode->get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("{}: {}", r.field("volume_mode"), e.what()));
    }
  }
  r.read("pinned_spine_nodes", rope.pinned_spine_nodes);
  r.read("velocity_jitter", rope.velocity_jitter);
  if (r.has("pull")) {
    ObjectReader p = r.child("pull");
    p.read("amplitude", rope.pull.pull_amplitude);
    p.read("twist", rope.pull.twist_amplitude);
    p.read("frequency", rope.pull.frequency);
    p.read("duration", rope.pull.duration);
    p.finish();
    require(rope.pull.frequency >= 0.0, p.field("frequency") + ": must be >= 0");
    require(rope.pull.duration >= 0.0, p.field("duration") + ": must be >= 0");
  }
  r.finish();
  require(rope.topology.stiffness.spring >= 0.0, r.field("K_l") + ": must be >= 0");
  require(rope.topology.stiffness.volume >= 0.0, r.field("K_V") + ": must be >= 0");
  require(rope.topology.stiffness.torsion >= 0.0, r.field("K_t") + ": must be >= 0");
  require(rope.topology.mass_total > 0.0, r.field("mass") + ": must be positive");
  require(rope.velocity_jitter >= 0.0, r.field("velocity_jitter") + ": must be >= 0");
}

void read_engine(ObjectReader& r, EngineConfig& e) {
  r.read("pbd_iterations", e.pbd_iterations);
  r.read("pbd_stiffness", e.pbd_stiffness);
  r.read("collision_radius", e.collision_radius);
  r.read("collision_stiffness", e.collision_stiffness);
  if (const json* g = r.raw("gravity")) e.external_accel = read_vector(*g, r.field("gravity"));
  if (const json* k = r.raw("kernel")) {
    if (!k->is_string()) throw ConfigError(r.field("kernel") + ": expected a string");
    e.kernel = parse_kernel(k->get<std::string>(), r.field("kernel"));
  }
  r.read("divergence_bound", e.divergence_bound);
  r.read("pinned_nodes", e.pinned_nodes);
  r.finish();
  require(e.pbd_iterations >= 0, r.field("pbd_iterations") + ": must be >= 0");
  require(e.pbd_stiffness >= 0.0 && e.pbd_stiffness <= 1.0, r.field("pbd_stiffness") + ": must lie in [0, 1]");
  require(e.collision_stiffness >= 0.0, r.field("collision_stiffness") + ": must be >= 0");
  require(e.divergence_bound > 0.0, r.field("divergence_bound") + ": must be positive");
}

}  // namespace

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::pendulum: return "pendulum";
    case ScenarioKind::dlo: return "dlo";
    case ScenarioKind::harmonic: return "harmonic";
  }
  return "?";
}

StabilityCriterion default_criterion(ScenarioKind kind) {
  if (kind == ScenarioKind::dlo) return {5000, 10.0, 10.0};
  return {10000, 2.0, 1e3};
}

ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON ({}): {}", line_column(text, e.byte), e.what()));
  }

  ScenarioConfig c;
  ObjectReader r(j, "");
  if (!r.has("format_version")) throw ConfigError("format_version: missing");
  r.read("format_version", c.format_version);
  require(c.format_version == 1, fmt::format("format_version: unsupported version {}", c.format_version));

  if (const json* kind = r.raw("scenario")) {
    if (!kind->is_string()) throw ConfigError("scenario: expected a string");
    c.kind = parse_kind(kind->get<std::string>(), "scenario");
  }
  c.criterion = default_criterion(c.kind);

  if (const json* list = r.raw("integrators")) {
    if (!list->is_array()) throw ConfigError("integrators: expected a list of names");
    c.integrators.clear();
    for (std::size_t i = 0; i < list->size(); ++i) {
      const json& name = (*list)[i];
      if (!name.is_string()) throw ConfigError(fmt::format("integrators[{}]: expected a name", i));
      try {
        c.integrators.push_back(parse_integrator(name.get<std::string>()));
      } catch (const PreconditionError& e) {
        throw ConfigError(fmt::format("integrators[{}]: {}", i, e.what()));
      }
    }
  }
  r.read("dt", c.dt);
  r.read("phase_dts", c.phase_dts);
  if (r.has("dt_search")) {
    ObjectReader s = r.child("dt_search");
    s.read("lo", c.dt_lo);
    s.read("hi", c.dt_hi);
    s.finish();
  }
  r.read("steps", c.steps);
  if (r.has("initial")) {
    ObjectReader s = r.child("initial");
    s.read("x", c.initial_x);
    s.read("v", c.initial_v);
    s.finish();
  }
  if (r.has("rope")) {
    ObjectReader s = r.child("rope");
    read_rope(s, c);
  }
  if (r.has("engine")) {
    ObjectReader s = r.child("engine");
    read_engine(s, c.rope.engine);
  }
  if (r.has("stability")) {
    ObjectReader s = r.child("stability");
    s.read("horizon_steps", c.criterion.horizon_steps);
    s.read("energy_ceiling_factor", c.criterion.energy_ceiling_factor);
    s.read("position_bound", c.criterion.position_bound);
    s.finish();
  }
  if (r.has("bench")) {
    ObjectReader s = r.child("bench");
    s.read("classify_steps", c.bench.classify_steps);
    s.read("classify_h", c.bench.classify_h);
    s.read("timing_iterations", c.bench.timing_iterations);
    s.read("timing_warmup", c.bench.timing_warmup);
    if (s.has("timing_dt")) {
      double dt = 0.0;
      s.read("timing_dt", dt);
      require(dt > 0.0, "bench.timing_dt: must be positive");
      c.bench.timing_dt = dt;
    }
    s.finish();
  }
  r.read("output_dir", c.output_dir);
  r.read("seed", c.seed);
  r.finish();

  require(!c.integrators.empty(), "integrators: need at least one integrator");
  require(c.dt > 0.0, fmt::format("dt: must be positive (got {})", c.dt));
  for (std::size_t i = 0; i < c.phase_dts.size(); ++i) {
    require(c.phase_dts[i] > 0.0, fmt::format("phase_dts[{}]: must be positive", i));
  }
  require(c.dt_lo > 0.0, "dt_search.lo: must be positive");
  require(c.dt_hi > c.dt_lo, "dt_search.hi: must exceed dt_search.lo");
  require(c.steps >= 1, "steps: must be >= 1");
  require(c.criterion.horizon_steps >= 1000, "stability.horizon_steps: must be >= 1000");
  require(c.criterion.energy_ceiling_factor > 1.0, "stability.energy_ceiling_factor: must be > 1");
  require(c.criterion.position_bound > 0.0, "stability.position_bound: must be positive");
  require(c.bench.classify_steps >= 2, "bench.classify_steps: must be >= 2");
  require(c.bench.classify_h > 0.0, "bench.classify_h: must be positive");
  require(c.bench.timing_iterations >= 2, "bench.timing_iterations: must be >= 2");
  c.bench.criterion = c.criterion;
  c.bench.integrators = c.integrators;
  c.bench.dt_lo = c.dt_lo;
  c.bench.dt_hi = c.dt_hi;
  c.rope.seed = c.seed;

  if (c.kind == ScenarioKind::dlo) {
    // Build once so geometry and pin problems surface as config errors.
    try {
      DloScenario scenario(resolved_rope(c));
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("rope: {}", e.what()));
    }
  }
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_json(const ScenarioConfig& c) {
  json j;
  j["format_version"] = c.format_version;
  j["scenario"] = to_string(c.kind);
  j["integrators"] = json::array();
  for (IntegratorKind k : c.integrators) j["integrators"].push_back(std::string(spec_of(k).name));
  j["dt"] = c.dt;
  j["phase_dts"] = c.phase_dts;
  j["dt_search"] = {{"lo", c.dt_lo}, {"hi", c.dt_hi}};
  j["steps"] = c.steps;
  j["initial"] = {{"x", c.initial_x}, {"v", c.initial_v}};

  const DloScenarioParams& rope = c.rope;
  json r;
  if (c.spine) {
    r["spine"] = json::array();
    for (const Vector3& p : *c.spine) r["spine"].push_back(write_vector(p));
  }
  r["generator"] = {{"kind", c.generator.kind},
                    {"segments", c.generator.segments},
                    {"length", c.generator.length},
                    {"segment_length", c.generator.segment_length},
                    {"gap", c.generator.gap}};
  r["frame_scale"] = rope.topology.frame_scale;
  r["K_l"] = rope.topology.stiffness.spring;
  r["K_V"] = rope.topology.stiffness.volume;
  r["K_t"] = rope.topology.stiffness.torsion;
  r["mass"] = rope.topology.mass_total;
  r["volume_mode"] = to_string(rope.topology.volume_mode);
  r["pinned_spine_nodes"] = rope.pinned_spine_nodes;
  r["velocity_jitter"] = rope.velocity_jitter;
  r["pull"] = {{"amplitude", rope.pull.pull_amplitude},
               {"twist", rope.pull.twist_amplitude},
               {"frequency", rope.pull.frequency},
               {"duration", rope.pull.duration}};
  j["rope"] = r;

  const EngineConfig& e = rope.engine;
  j["engine"] = {{"pbd_iterations", e.pbd_iterations},
                 {"pbd_stiffness", e.pbd_stiffness},
                 {"collision_radius", e.collision_radius},
                 {"collision_stiffness", e.collision_stiffness},
                 {"gravity", write_vector(e.external_accel)},
                 {"kernel", e.kernel == KernelMode::serial ? "serial" : "parallel"},
                 {"divergence_bound", e.divergence_bound},
                 {"pinned_nodes", e.pinned_nodes}};
  j["stability"] = {{"horizon_steps", c.criterion.horizon_steps},
                    {"energy_ceiling_factor", c.criterion.energy_ceiling_factor},
                    {"position_bound", c.criterion.position_bound}};
  json bench = {{"classify_steps", c.bench.classify_steps},
                {"classify_h", c.bench.classify_h},
                {"timing_iterations", c.bench.timing_iterations},
                {"timing_warmup", c.bench.timing_warmup}};
  if (c.bench.timing_dt) bench["timing_dt"] = *c.bench.timing_dt;
  j["bench"] = bench;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  return j.dump(2);
}

DloScenarioParams resolved_rope(const ScenarioConfig& c) {
  DloScenarioParams rope = c.rope;
  if (c.spine) {
    rope.spine = *c.spine;
  } else if (c.generator.kind == "hairpin") {
    rope.spine = hairpin_spine(c.generator.segments, c.generator.segment_length, c.generator.gap);
  } else {
    rope.spine = straight_spine(c.generator.segments, c.generator.length);
  }
  rope.segments = rope.spine.size() - 1;
  rope.seed = c.seed;
  return rope;
}

std::unique_ptr<BenchSystem> make_system(const ScenarioConfig& c) {
  switch (c.kind) {
    case ScenarioKind::pendulum:
      return std::make_unique<ScalarOdeSystem>(ScalarOdeSystem::pendulum(c.initial_x, c.initial_v));
    case ScenarioKind::harmonic:
      return std::make_unique<ScalarOdeSystem>(ScalarOdeSystem::harmonic(c.initial_x, c.initial_v));
    case ScenarioKind::dlo:
      return std::make_unique<DloScenario>(resolved_rope(c));
  }
  throw ConfigError("scenario: unsupported kind");
}

}  // namespace dlo
