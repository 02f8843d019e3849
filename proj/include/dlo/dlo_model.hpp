#pragma once

// Deformable linear object built around a sampled support curve. Each spine sample R_k
// carries two satellite nodes Q_k and P_k offset along its material frame; every segment
// is filled with three tetrahedra whose edges become springs.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dlo/constraints.hpp"
#include "dlo/core_math.hpp"

namespace dlo {

struct Frame {
  Vector3 tangent;
  Vector3 q;
  Vector3 p;
};

/// Material frames along the spine. Interior frames use the cross product of the two
/// incident segments; collinear triples transport the neighbouring frame; endpoints copy
/// the adjacent interior frame. Requires at least 3 points with distinct neighbours.
std::vector<Frame> build_frames(std::span<const Vector3> spine);

struct Stiffness {
  double spring = 1.0;   // K_l, N/m
  double volume = 0.0;   // K_V
  double torsion = 0.0;  // K_t, N/m
};

struct TopologyParams {
  double frame_scale = 0.0;  // m; <= 0 selects half the mean segment length
  Stiffness stiffness;
  double mass_total = 1.0;  // kg, lumped uniformly over all nodes
  VolumeMode volume_mode = VolumeMode::as_printed;
};

using Tetrahedron = std::array<std::size_t, 4>;

struct DloTopology {
  std::vector<Vector3> spine;
  double frame_scale = 0.0;
  Stiffness stiffness;
  double mass_total = 0.0;
  VolumeMode volume_mode = VolumeMode::as_printed;

  std::vector<Vector3> rest_positions;
  std::vector<double> masses;
  std::vector<Tetrahedron> tetrahedra;
  std::vector<SpringConstraint> springs;
  std::vector<VolumeConstraint> volumes;
  std::vector<TorsionConstraint> torsions;

  std::size_t node_count() const { return rest_positions.size(); }
  std::size_t spine_count() const { return spine.size(); }
  std::size_t segment_count() const { return spine.size() - 1; }

  static constexpr std::size_t r_node(std::size_t k) { return 3 * k; }
  static constexpr std::size_t q_node(std::size_t k) { return 3 * k + 1; }
  static constexpr std::size_t p_node(std::size_t k) { return 3 * k + 2; }
};

/// Half the mean spine segment length.
double default_frame_scale(std::span<const Vector3> spine);

DloTopology build_topology(std::span<const Vector3> spine, const TopologyParams& params);

struct DloState {
  std::vector<Vector3> positions;
  std::vector<Vector3> velocities;
  std::vector<Vector3> force_accumulator;   // Δf, fed into the next integration stage
  std::vector<Vector3> previous_positions;  // positions before the last integration stage

  std::size_t size() const { return positions.size(); }
};

DloState make_rest_state(const DloTopology& topology);

/// Spring plus quadratic volume potential, J.
double elastic_energy(const DloTopology& topology, std::span<const Vector3> positions);

/// Largest ‖pi - pj‖ / L0 over all springs.
double max_stretch_ratio(const DloTopology& topology, std::span<const Vector3> positions);

// --- topology files (JSON, format_version 1) --------------------------------

std::string topology_to_json(const DloTopology& topology);
/// Rebuilds the topology from the stored spine and parameters, then applies the stored
/// per-node masses. Throws PreconditionError on schema violations.
DloTopology topology_from_json(const std::string& text);

const char* to_string(VolumeMode mode);
VolumeMode parse_volume_mode(const std::string& name);

}  // namespace dlo
