#pragma once

// Constraint functions, their quadratic potentials E = ½·K·C², and the penalty forces
// F = -∇E acting on the constrained nodes. Torsion uses a quaternion target instead of a
// potential.

#include <cstddef>
#include <functional>
#include <span>

#include "dlo/core_math.hpp"

namespace dlo {

struct SpringConstraint {
  std::size_t i = 0;
  std::size_t j = 0;
  double rest_length = 1.0;  // m
  double stiffness = 0.0;    // N/m
};

enum class VolumeMode {
  linear,        // quadratic potential on the relative volume change
  as_printed,    // adds the anti-collapse barrier together with the "+V" term
  barrier_only,  // adds the anti-collapse barrier, drops the "+V" term
};

struct VolumeConstraint {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  std::size_t l = 0;
  double rest_volume = 1.0;  // m³, signed
  double stiffness = 0.0;
  VolumeMode mode = VolumeMode::linear;
};

/// Angular spring at the middle spine node j of three consecutive spine nodes i, j, k,
/// acting on the satellite node qj.
struct TorsionConstraint {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  std::size_t qi = 0;
  std::size_t qj = 0;
  std::size_t qk = 0;
  double rest_angle_ij = 0.0;  // rad
  double rest_angle_jk = 0.0;  // rad
  double stiffness = 0.0;      // N/m
};

struct PairForce {
  Vector3 at_i;
  Vector3 at_j;
};

// --- springs ---------------------------------------------------------------

/// ‖pi - pj‖ - L0. GeometryError for coincident points.
double spring_constraint_value(const Vector3& pi, const Vector3& pj, double rest_length);
double spring_energy(const SpringConstraint& c, const Vector3& pi, const Vector3& pj);
PairForce spring_force(const SpringConstraint& c, const Vector3& pi, const Vector3& pj);

// --- tetrahedral volume ----------------------------------------------------

/// (1/6)·(pj - pi)·((pk - pi) × (pl - pi))
double tet_signed_volume(const Vector3& pi, const Vector3& pj, const Vector3& pk,
                         const Vector3& pl);

double volume_constraint_value(const VolumeConstraint& c, std::span<const Vector3> positions);
double volume_energy(const VolumeConstraint& c, std::span<const Vector3> positions);

/// Force at node c.i from the quadratic volume potential.
Vector3 volume_force_linear(const VolumeConstraint& c, std::span<const Vector3> positions);

enum class BarrierForm { as_printed, barrier_only };

/// Force at node c.i with the 1/|V| anti-collapse term, evaluated literally.
/// Throws GeometryError when |V| <= 1e-12.
Vector3 volume_force_nonlinear(const VolumeConstraint& c, std::span<const Vector3> positions,
                               BarrierForm form = BarrierForm::as_printed);

/// Force at node c.i according to c.mode. The nonlinear modes clamp |V| from below at
/// 1e-9·|V0| inside the barrier term so a collapsed cell yields a large finite force.
Vector3 volume_force(const VolumeConstraint& c, std::span<const Vector3> positions);

/// The same cell with node `slot` (0..3) moved into the leading position by an even
/// permutation, so the signed volume and V0 are unchanged.
VolumeConstraint rotated_to(const VolumeConstraint& c, int slot);

// --- torsion ---------------------------------------------------------------

struct TorsionAngles {
  double u_ij = 0.0;
  double u_jk = 0.0;
  double lambda = 0.5;
};

/// Current twist angles between consecutive Q-vectors about the spine segments, and the
/// segment-length interpolation weight.
TorsionAngles torsion_angles(const TorsionConstraint& c, std::span<const Vector3> positions);

UnitQuaternion torsion_quaternion(const TorsionConstraint& c, std::span<const Vector3> positions);

/// K_t·(target - Q_j), target being Q_j rotated about R_j by the torsion quaternion.
Vector3 torsion_force(const TorsionConstraint& c, std::span<const Vector3> positions);

// --- test support ----------------------------------------------------------

Vector3 finite_difference_gradient(const std::function<double(const Vector3&)>& energy,
                                   const Vector3& x, double h);

}  // namespace dlo
