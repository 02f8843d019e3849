#include <algorithm>
#include <limits>
#include <string>

#include "dlo/errors.hpp"
#include "dlo/kernels.hpp"
#include "segment_pairs.hpp"

namespace dlo {

namespace {

// Contribution ids follow the serial accumulation order: springs (i then j), volume cells
// (slots 0..3), torsion constraints.
struct ContributionLayout {
  std::size_t springs;
  std::size_t volumes;
  std::size_t torsions;

  explicit ContributionLayout(const DloTopology& t)
      : springs(t.springs.size()), volumes(t.volumes.size()), torsions(t.torsions.size()) {}

  std::size_t volume_base() const { return 2 * springs; }
  std::size_t torsion_base() const { return 2 * springs + 4 * volumes; }
  std::size_t total() const { return torsion_base() + torsions; }
};

struct FirstFailure {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  ConstraintError::Kind kind = ConstraintError::Kind::spring;
  std::size_t index = 0;
  std::string message;

  void offer(std::size_t candidate, ConstraintError::Kind k, std::size_t i, const char* what) {
    if (candidate < id) {
      id = candidate;
      kind = k;
      index = i;
      message = what;
    }
  }
};

}  // namespace

ForceGatherPlan::ForceGatherPlan(const DloTopology& topology) {
  const ContributionLayout layout(topology);
  contribution_count_ = layout.total();

  std::vector<std::size_t> target(contribution_count_);
  for (std::size_t s = 0; s < layout.springs; ++s) {
    target[2 * s] = topology.springs[s].i;
    target[2 * s + 1] = topology.springs[s].j;
  }
  for (std::size_t v = 0; v < layout.volumes; ++v) {
    for (int slot = 0; slot < 4; ++slot) {
      target[layout.volume_base() + 4 * v + slot] = rotated_to(topology.volumes[v], slot).i;
    }
  }
  for (std::size_t t = 0; t < layout.torsions; ++t) {
    target[layout.torsion_base() + t] = topology.torsions[t].qj;
  }

  const std::size_t nodes = topology.node_count();
  offsets_.assign(nodes + 1, 0);
  for (std::size_t node : target) ++offsets_[node + 1];
  for (std::size_t n = 0; n < nodes; ++n) offsets_[n + 1] += offsets_[n];
  ids_.resize(contribution_count_);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t id = 0; id < contribution_count_; ++id) ids_[cursor[target[id]]++] = id;
}

void total_forces_parallel(const DloTopology& topology, const ForceGatherPlan& plan,
                           std::span<const Vector3> positions, std::span<const Vector3> external,
                           std::span<const Vector3> accumulator, std::span<Vector3> out,
                           std::vector<Vector3>& scratch) {
  const ContributionLayout layout(topology);
  scratch.resize(plan.contribution_count());
  FirstFailure failure;

#pragma omp parallel
  {
    FirstFailure local;

#pragma omp for schedule(static) nowait
    for (std::size_t s = 0; s < layout.springs; ++s) {
      const SpringConstraint& c = topology.springs[s];
      try {
        const PairForce f = spring_force(c, positions[c.i], positions[c.j]);
        scratch[2 * s] = f.at_i;
        scratch[2 * s + 1] = f.at_j;
      } catch (const GeometryError& e) {
        local.offer(2 * s, ConstraintError::Kind::spring, s, e.what());
      }
    }

#pragma omp for schedule(static) nowait
    for (std::size_t v = 0; v < layout.volumes; ++v) {
      for (int slot = 0; slot < 4; ++slot) {
        const std::size_t id = layout.volume_base() + 4 * v + slot;
        try {
          scratch[id] = volume_force(rotated_to(topology.volumes[v], slot), positions);
        } catch (const GeometryError& e) {
          local.offer(id, ConstraintError::Kind::volume, v, e.what());
        }
      }
    }

#pragma omp for schedule(static)
    for (std::size_t t = 0; t < layout.torsions; ++t) {
      const std::size_t id = layout.torsion_base() + t;
      try {
        scratch[id] = torsion_force(topology.torsions[t], positions);
      } catch (const GeometryError& e) {
        local.offer(id, ConstraintError::Kind::torsion, t, e.what());
      }
    }

#pragma omp critical(dlo_force_failure)
    failure.offer(local.id, local.kind, local.index, local.message.c_str());
  }

  if (failure.id != std::numeric_limits<std::size_t>::max()) {
    throw ConstraintError(failure.kind, failure.index, failure.message);
  }

  const std::size_t nodes = out.size();
#pragma omp parallel for schedule(static)
  for (std::size_t n = 0; n < nodes; ++n) {
    Vector3 acc{};
    for (std::size_t id : plan.node_contributions(n)) acc += scratch[id];
    acc += external[n];
    acc += accumulator[n];
    out[n] = acc;
  }
}

std::vector<CollisionPair> detect_collisions_parallel(const DloTopology& topology,
                                                      std::span<const Vector3> positions,
                                                      double radius) {
  const std::vector<detail::Box> boxes = detail::segment_boxes(topology, positions, radius);
  const std::size_t segments = topology.segment_count();
  std::vector<CollisionPair> pairs;

#pragma omp parallel
  {
    std::vector<CollisionPair> local;
#pragma omp for schedule(dynamic, 4) nowait
    for (std::size_t a = 0; a < segments; ++a) {
      for (std::size_t b = a + 2; b < segments; ++b) {
        CollisionPair pair;
        if (detail::test_segment_pair(positions, boxes, a, b, radius, pair)) local.push_back(pair);
      }
    }
#pragma omp critical(dlo_collision_merge)
    pairs.insert(pairs.end(), local.begin(), local.end());
  }

  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

}  // namespace dlo
