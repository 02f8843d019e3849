#include "dlo/dlo_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <utility>

#include <nlohmann/json.hpp>

#include "dlo/errors.hpp"

namespace dlo {

namespace {

constexpr double kDistinctPoints = 1e-12;
constexpr double kCollinearSine = 1e-9;
constexpr int kTopologyFormatVersion = 1;

// Any unit vector orthogonal to t.
Vector3 any_perpendicular(const Vector3& t) {
  const double ax = std::abs(t.x), ay = std::abs(t.y), az = std::abs(t.z);
  const Vector3 e = (ax <= ay && ax <= az) ? Vector3{1, 0, 0}
                    : (ay <= az)           ? Vector3{0, 1, 0}
                                           : Vector3{0, 0, 1};
  return normalized(cross(t, e));
}

Vector3 transport(const Vector3& q, const Vector3& tangent) {
  const Vector3 projected = q - dot(q, tangent) * tangent;
  if (norm(projected) < 1e-9) return any_perpendicular(tangent);
  return normalized(projected);
}

}  // namespace

std::vector<Frame> build_frames(std::span<const Vector3> spine) {
  const std::size_t n = spine.size();
  if (n < 3) throw PreconditionError("build_frames: need at least 3 spine points");
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (norm(spine[k + 1] - spine[k]) <= kDistinctPoints) {
      throw PreconditionError("build_frames: consecutive spine points coincide at index " +
                              std::to_string(k));
    }
  }

  std::vector<Frame> frames(n);
  for (std::size_t k = 0; k < n; ++k) {
    frames[k].tangent = k + 1 < n ? normalized(spine[k + 1] - spine[k])
                                  : normalized(spine[k] - spine[k - 1]);
  }

  // q_k from the two incident segments wherever the triple bends.
  std::vector<std::optional<Vector3>> bent(n);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const Vector3 back = spine[k - 1] - spine[k];
    const Vector3 ahead = spine[k + 1] - spine[k];
    const Vector3 c = cross(back, ahead);
    if (norm(c) > kCollinearSine * norm(back) * norm(ahead)) bent[k] = c / norm(c);
  }

  std::size_t seed = 1;
  while (seed + 1 < n && !bent[seed]) ++seed;
  if (seed + 1 == n) {
    seed = 1;
    frames[seed].q = any_perpendicular(frames[seed].tangent);
  } else {
    frames[seed].q = *bent[seed];
  }
  for (std::size_t k = seed; k-- > 1;) {
    frames[k].q = transport(frames[k + 1].q, frames[k].tangent);
  }
  for (std::size_t k = seed + 1; k + 1 < n; ++k) {
    if (bent[k]) {
      frames[k].q = dot(*bent[k], frames[k - 1].q) < 0.0 ? -*bent[k] : *bent[k];
    } else {
      frames[k].q = transport(frames[k - 1].q, frames[k].tangent);
    }
  }

  for (std::size_t k = 1; k + 1 < n; ++k) {
    const Vector3 back = spine[k - 1] - spine[k];
    frames[k].p = normalized(cross(frames[k].q, back) / norm(back));
  }
  frames[0].q = frames[1].q;
  frames[0].p = frames[1].p;
  frames[n - 1].q = frames[n - 2].q;
  frames[n - 1].p = frames[n - 2].p;
  return frames;
}

double default_frame_scale(std::span<const Vector3> spine) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < spine.size(); ++k) total += norm(spine[k + 1] - spine[k]);
  return 0.5 * total / static_cast<double>(spine.size() - 1);
}

DloTopology build_topology(std::span<const Vector3> spine, const TopologyParams& params) {
  const std::vector<Frame> frames = build_frames(spine);
  if (!(params.mass_total > 0.0)) throw PreconditionError("build_topology: mass_total must be > 0");

  DloTopology topo;
  topo.spine.assign(spine.begin(), spine.end());
  topo.frame_scale = params.frame_scale > 0.0 ? params.frame_scale : default_frame_scale(spine);
  topo.stiffness = params.stiffness;
  topo.mass_total = params.mass_total;
  topo.volume_mode = params.volume_mode;

  const std::size_t n = spine.size();
  topo.rest_positions.resize(3 * n);
  for (std::size_t k = 0; k < n; ++k) {
    topo.rest_positions[DloTopology::r_node(k)] = spine[k];
    topo.rest_positions[DloTopology::q_node(k)] = spine[k] + topo.frame_scale * frames[k].q;
    topo.rest_positions[DloTopology::p_node(k)] = spine[k] + topo.frame_scale * frames[k].p;
  }
  topo.masses.assign(3 * n, params.mass_total / static_cast<double>(3 * n));

  using T = DloTopology;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    topo.tetrahedra.push_back({T::r_node(k + 1), T::p_node(k), T::q_node(k), T::r_node(k)});
    topo.tetrahedra.push_back({T::r_node(k + 1), T::q_node(k + 1), T::q_node(k), T::p_node(k)});
    topo.tetrahedra.push_back({T::r_node(k + 1), T::p_node(k), T::p_node(k + 1), T::q_node(k + 1)});
  }

  const auto& rest = topo.rest_positions;
  std::map<std::pair<std::size_t, std::size_t>, bool> seen;
  for (const Tetrahedron& tet : topo.tetrahedra) {
    const double v0 = tet_signed_volume(rest[tet[0]], rest[tet[1]], rest[tet[2]], rest[tet[3]]);
    if (!(v0 > 1e-15 * std::pow(topo.frame_scale, 3))) {
      throw GeometryError("build_topology: tetrahedron with non-positive rest volume");
    }
    topo.volumes.push_back({tet[0], tet[1], tet[2], tet[3], v0, params.stiffness.volume,
                            params.volume_mode});
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        const auto key = std::minmax(tet[a], tet[b]);
        if (seen.emplace(key, true).second) {
          topo.springs.push_back({tet[a], tet[b], norm(rest[tet[a]] - rest[tet[b]]),
                                  params.stiffness.spring});
        }
      }
    }
  }

  for (std::size_t k = 1; k + 1 < n; ++k) {
    TorsionConstraint c{T::r_node(k - 1), T::r_node(k), T::r_node(k + 1),
                        T::q_node(k - 1), T::q_node(k), T::q_node(k + 1),
                        0.0,              0.0,          params.stiffness.torsion};
    const TorsionAngles rest_angles = torsion_angles(c, rest);
    c.rest_angle_ij = rest_angles.u_ij;
    c.rest_angle_jk = rest_angles.u_jk;
    topo.torsions.push_back(c);
  }
  return topo;
}

DloState make_rest_state(const DloTopology& topology) {
  const std::size_t n = topology.node_count();
  DloState s;
  s.positions = topology.rest_positions;
  s.velocities.assign(n, Vector3{});
  s.force_accumulator.assign(n, Vector3{});
  s.previous_positions = topology.rest_positions;
  return s;
}

double elastic_energy(const DloTopology& topology, std::span<const Vector3> positions) {
  double e = 0.0;
  for (const SpringConstraint& c : topology.springs) e += spring_energy(c, positions[c.i], positions[c.j]);
  for (const VolumeConstraint& c : topology.volumes) e += volume_energy(c, positions);
  return e;
}

double max_stretch_ratio(const DloTopology& topology, std::span<const Vector3> positions) {
  double ratio = 0.0;
  for (const SpringConstraint& c : topology.springs) {
    ratio = std::max(ratio, norm(positions[c.i] - positions[c.j]) / c.rest_length);
  }
  return ratio;
}

const char* to_string(VolumeMode mode) {
  switch (mode) {
    case VolumeMode::linear:
      return "linear";
    case VolumeMode::as_printed:
      return "as_printed";
    case VolumeMode::barrier_only:
      return "barrier_only";
  }
  return "?";
}

VolumeMode parse_volume_mode(const std::string& name) {
  if (name == "linear") return VolumeMode::linear;
  if (name == "as_printed") return VolumeMode::as_printed;
  if (name == "barrier_only") return VolumeMode::barrier_only;
  throw PreconditionError("unknown volume_mode '" + name + "'");
}

std::string topology_to_json(const DloTopology& topology) {
  nlohmann::json j;
  j["format_version"] = kTopologyFormatVersion;
  auto& spine = j["spine"] = nlohmann::json::array();
  for (const Vector3& r : topology.spine) spine.push_back({r.x, r.y, r.z});
  j["frame_scale"] = topology.frame_scale;
  j["stiffness"] = {{"K_l", topology.stiffness.spring},
                    {"K_V", topology.stiffness.volume},
                    {"K_t", topology.stiffness.torsion}};
  j["volume_mode"] = to_string(topology.volume_mode);
  j["mass_total"] = topology.mass_total;
  j["masses"] = topology.masses;
  return j.dump(2);
}

DloTopology topology_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw PreconditionError(std::string("topology: ") + e.what());
  }
  static const std::vector<std::string> known = {"format_version", "spine", "frame_scale", "stiffness",
                                                 "volume_mode", "mass_total", "masses"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw PreconditionError("topology: unknown key '" + item.key() + "'");
    }
  }
  try {
    if (j.at("format_version").get<int>() != kTopologyFormatVersion) {
      throw PreconditionError("topology: unsupported format_version");
    }
    std::vector<Vector3> spine;
    for (const auto& p : j.at("spine")) {
      if (p.size() != 3) throw PreconditionError("topology: spine points need 3 coordinates");
      spine.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    TopologyParams params;
    params.frame_scale = j.at("frame_scale").get<double>();
    const auto& k = j.at("stiffness");
    for (const auto& item : k.items()) {
      if (item.key() != "K_l" && item.key() != "K_V" && item.key() != "K_t") {
        throw PreconditionError("topology: unknown key 'stiffness." + item.key() + "'");
      }
    }
    params.stiffness = {k.at("K_l").get<double>(), k.at("K_V").get<double>(), k.at("K_t").get<double>()};
    params.volume_mode = parse_volume_mode(j.value("volume_mode", std::string("as_printed")));
    params.mass_total = j.at("mass_total").get<double>();
    DloTopology topo = build_topology(spine, params);
    if (j.contains("masses")) {
      auto masses = j.at("masses").get<std::vector<double>>();
      if (masses.size() != topo.node_count()) throw PreconditionError("topology: masses length mismatch");
      if (std::any_of(masses.begin(), masses.end(), [](double m) { return !(m > 0.0); })) {
        throw PreconditionError("topology: masses must be positive");
      }
      topo.masses = std::move(masses);
    }
    return topo;
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("topology: ") + e.what());
  }
}

}  // namespace dlo
