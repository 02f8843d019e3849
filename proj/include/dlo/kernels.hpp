#pragma once

// Data-parallel kernels of the simulation. Each has a serial reference (the definition of
// the result) and an OpenMP version that must reproduce it bit-for-bit.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dlo/core_math.hpp"
#include "dlo/dlo_model.hpp"

namespace dlo {

enum class KernelMode { serial, parallel };

// --- force accumulation ------------------------------------------------------

/// Sum of spring, volume (all four nodes of every cell) and torsion forces, then
/// `external`, then `accumulator`. Per node, contributions are added in constraint-list
/// order. Degenerate geometry raises ConstraintError naming the first offending
/// constraint in that order.
void total_forces_serial(const DloTopology& topology, std::span<const Vector3> positions,
                         std::span<const Vector3> external, std::span<const Vector3> accumulator,
                         std::span<Vector3> out);

/// Precomputed per-node gather lists so the OpenMP kernel can evaluate constraints
/// independently and still sum in the serial order.
class ForceGatherPlan {
 public:
  explicit ForceGatherPlan(const DloTopology& topology);

  std::size_t contribution_count() const { return contribution_count_; }
  std::span<const std::size_t> node_contributions(std::size_t node) const {
    return {ids_.data() + offsets_[node], offsets_[node + 1] - offsets_[node]};
  }

 private:
  std::size_t contribution_count_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> ids_;
};

void total_forces_parallel(const DloTopology& topology, const ForceGatherPlan& plan,
                           std::span<const Vector3> positions, std::span<const Vector3> external,
                           std::span<const Vector3> accumulator, std::span<Vector3> out,
                           std::vector<Vector3>& scratch);

/// Convenience wrapper over the two kernels.
std::vector<Vector3> total_forces(const DloTopology& topology, const DloState& state,
                                  std::span<const Vector3> external,
                                  KernelMode mode = KernelMode::serial);

// --- self-collision detection -------------------------------------------------

struct SegmentClosest {
  double distance = 0.0;
  double s = 0.0;  // parameter on the first segment, 0 at its start node
  double t = 0.0;  // parameter on the second segment
  Vector3 on_first;
  Vector3 on_second;
};

/// Closest points between segments [a0,a1] and [b0,b1]. Parallel overlapping segments
/// pick the middle of the overlap.
SegmentClosest closest_points(const Vector3& a0, const Vector3& a1, const Vector3& b0,
                              const Vector3& b1);

struct CollisionPair {
  std::size_t first = 0;   // spine segment index, first < second - 1
  std::size_t second = 0;
  SegmentClosest closest;

  friend bool operator<(const CollisionPair& a, const CollisionPair& b) {
    return std::pair(a.first, a.second) < std::pair(b.first, b.second);
  }
};

/// All pairs of non-adjacent spine segments closer than 2·radius, sorted by index.
std::vector<CollisionPair> detect_collisions_serial(const DloTopology& topology,
                                                    std::span<const Vector3> positions,
                                                    double radius);
std::vector<CollisionPair> detect_collisions_parallel(const DloTopology& topology,
                                                      std::span<const Vector3> positions,
                                                      double radius);

}  // namespace dlo
