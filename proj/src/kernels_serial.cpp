#include <algorithm>
#include <cmath>

#include "dlo/errors.hpp"
#include "dlo/kernels.hpp"
#include "segment_pairs.hpp"

namespace dlo {

void total_forces_serial(const DloTopology& topology, std::span<const Vector3> positions,
                         std::span<const Vector3> external, std::span<const Vector3> accumulator,
                         std::span<Vector3> out) {
  std::fill(out.begin(), out.end(), Vector3{});

  for (std::size_t s = 0; s < topology.springs.size(); ++s) {
    const SpringConstraint& c = topology.springs[s];
    try {
      const PairForce f = spring_force(c, positions[c.i], positions[c.j]);
      out[c.i] += f.at_i;
      out[c.j] += f.at_j;
    } catch (const GeometryError& e) {
      throw ConstraintError(ConstraintError::Kind::spring, s, e.what());
    }
  }
  for (std::size_t v = 0; v < topology.volumes.size(); ++v) {
    try {
      for (int slot = 0; slot < 4; ++slot) {
        const VolumeConstraint c = rotated_to(topology.volumes[v], slot);
        out[c.i] += volume_force(c, positions);
      }
    } catch (const GeometryError& e) {
      throw ConstraintError(ConstraintError::Kind::volume, v, e.what());
    }
  }
  for (std::size_t t = 0; t < topology.torsions.size(); ++t) {
    const TorsionConstraint& c = topology.torsions[t];
    try {
      out[c.qj] += torsion_force(c, positions);
    } catch (const GeometryError& e) {
      throw ConstraintError(ConstraintError::Kind::torsion, t, e.what());
    }
  }
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] += external[n];
    out[n] += accumulator[n];
  }
}

std::vector<Vector3> total_forces(const DloTopology& topology, const DloState& state,
                                  std::span<const Vector3> external, KernelMode mode) {
  std::vector<Vector3> out(topology.node_count());
  if (mode == KernelMode::serial) {
    total_forces_serial(topology, state.positions, external, state.force_accumulator, out);
  } else {
    const ForceGatherPlan plan(topology);
    std::vector<Vector3> scratch;
    total_forces_parallel(topology, plan, state.positions, external, state.force_accumulator, out,
                          scratch);
  }
  return out;
}

SegmentClosest closest_points(const Vector3& a0, const Vector3& a1, const Vector3& b0,
                              const Vector3& b1) {
  // Clamped closest points between two segments (Ericson, Real-Time Collision Detection 5.1.9).
  constexpr double eps = 1e-14;
  const Vector3 d1 = a1 - a0;
  const Vector3 d2 = b1 - b0;
  const Vector3 r = a0 - b0;
  const double a = dot(d1, d1);
  const double e = dot(d2, d2);
  const double f = dot(d2, r);
  double s = 0.0;
  double t = 0.0;

  if (a <= eps && e <= eps) {
    s = t = 0.0;
  } else if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = dot(d1, r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = dot(d1, d2);
      const double denom = a * e - b * b;
      if (denom > eps * a * e) {
        s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
        t = (b * s + f) / e;
        if (t < 0.0) {
          t = 0.0;
          s = std::clamp(-c / a, 0.0, 1.0);
        } else if (t > 1.0) {
          t = 1.0;
          s = std::clamp((b - c) / a, 0.0, 1.0);
        }
      } else {
        // Parallel: centre of the overlap of the projection of [b0,b1] onto the first line.
        const double u0 = -c / a;
        const double u1 = (b - c) / a;
        const double lo = std::max(0.0, std::min(u0, u1));
        const double hi = std::min(1.0, std::max(u0, u1));
        s = lo <= hi ? 0.5 * (lo + hi) : (std::max(u0, u1) < 0.0 ? 0.0 : 1.0);
        t = std::clamp((b * s + f) / e, 0.0, 1.0);
        s = std::clamp((b * t - c) / a, 0.0, 1.0);
      }
    }
  }

  SegmentClosest out;
  out.s = s;
  out.t = t;
  out.on_first = a0 + s * d1;
  out.on_second = b0 + t * d2;
  out.distance = norm(out.on_first - out.on_second);
  return out;
}

std::vector<CollisionPair> detect_collisions_serial(const DloTopology& topology,
                                                    std::span<const Vector3> positions,
                                                    double radius) {
  const std::vector<detail::Box> boxes = detail::segment_boxes(topology, positions, radius);
  std::vector<CollisionPair> pairs;
  const std::size_t segments = topology.segment_count();
  for (std::size_t a = 0; a < segments; ++a) {
    for (std::size_t b = a + 2; b < segments; ++b) {
      CollisionPair pair;
      if (detail::test_segment_pair(positions, boxes, a, b, radius, pair)) {
        pairs.push_back(pair);
      }
    }
  }
  return pairs;
}

}  // namespace dlo
