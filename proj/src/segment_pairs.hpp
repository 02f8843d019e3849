#pragma once

// Narrow-phase pieces shared by the serial and OpenMP collision kernels.

#include <algorithm>
#include <span>
#include <vector>

#include "dlo/kernels.hpp"

namespace dlo::detail {

struct Box {
  Vector3 lo;
  Vector3 hi;
};

inline Box segment_box(const Vector3& a, const Vector3& b, double pad) {
  return {{std::min(a.x, b.x) - pad, std::min(a.y, b.y) - pad, std::min(a.z, b.z) - pad},
          {std::max(a.x, b.x) + pad, std::max(a.y, b.y) + pad, std::max(a.z, b.z) + pad}};
}

inline bool overlaps(const Box& a, const Box& b) {
  return a.lo.x <= b.hi.x && b.lo.x <= a.hi.x && a.lo.y <= b.hi.y && b.lo.y <= a.hi.y &&
         a.lo.z <= b.hi.z && b.lo.z <= a.hi.z;
}

inline std::vector<Box> segment_boxes(const DloTopology& topology,
                                      std::span<const Vector3> positions, double radius) {
  std::vector<Box> boxes(topology.segment_count());
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    boxes[k] = segment_box(positions[DloTopology::r_node(k)],
                           positions[DloTopology::r_node(k + 1)], radius);
  }
  return boxes;
}

inline bool test_segment_pair(std::span<const Vector3> positions, std::span<const Box> boxes,
                              std::size_t first, std::size_t second, double radius,
                              CollisionPair& out) {
  if (!overlaps(boxes[first], boxes[second])) return false;
  const auto r = [&](std::size_t k) { return positions[DloTopology::r_node(k)]; };
  const SegmentClosest c = closest_points(r(first), r(first + 1), r(second), r(second + 1));
  if (!(c.distance < 2.0 * radius)) return false;
  out = {first, second, c};
  return true;
}

}  // namespace dlo::detail
