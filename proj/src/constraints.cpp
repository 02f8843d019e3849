#include "dlo/constraints.hpp"

#include <cmath>
#include <numbers>

#include "dlo/errors.hpp"

namespace dlo {

namespace {

constexpr double kDegenerateLength = 1e-12;
constexpr double kCollapsedVolume = 1e-12;
constexpr double kBarrierClamp = 1e-9;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);
  return a <= -std::numbers::pi ? a + two_pi : a;
}

// Normal of the face opposite node i, (pj - pl) × (pk - pl); -∇_i V = n / 6.
Vector3 opposite_face_normal(const VolumeConstraint& c, std::span<const Vector3> p) {
  return cross(p[c.j] - p[c.l], p[c.k] - p[c.l]);
}

double current_volume(const VolumeConstraint& c, std::span<const Vector3> p) {
  return tet_signed_volume(p[c.i], p[c.j], p[c.k], p[c.l]);
}

double barrier_bracket(double volume, double rest, double barrier_volume, BarrierForm form) {
  double bracket = (volume - rest) / (6.0 * rest * rest) - sign(rest) * rest * rest / barrier_volume;
  if (form == BarrierForm::as_printed) bracket += volume;
  return bracket;
}

}  // namespace

double spring_constraint_value(const Vector3& pi, const Vector3& pj, double rest_length) {
  const double length = norm(pi - pj);
  if (length <= kDegenerateLength) {
    throw GeometryError("spring endpoints coincide");
  }
  return length - rest_length;
}

double spring_energy(const SpringConstraint& c, const Vector3& pi, const Vector3& pj) {
  const double value = spring_constraint_value(pi, pj, c.rest_length);
  return 0.5 * c.stiffness * value * value;
}

PairForce spring_force(const SpringConstraint& c, const Vector3& pi, const Vector3& pj) {
  const Vector3 d = pi - pj;
  const double length = norm(d);
  if (length <= kDegenerateLength) {
    throw GeometryError("spring endpoints coincide");
  }
  const Vector3 f = (-c.stiffness * (length - c.rest_length) / length) * d;
  return {f, -f};
}

double tet_signed_volume(const Vector3& pi, const Vector3& pj, const Vector3& pk,
                         const Vector3& pl) {
  return dot(pj - pi, cross(pk - pi, pl - pi)) / 6.0;
}

double volume_constraint_value(const VolumeConstraint& c, std::span<const Vector3> positions) {
  return (current_volume(c, positions) - c.rest_volume) / c.rest_volume;
}

double volume_energy(const VolumeConstraint& c, std::span<const Vector3> positions) {
  const double value = volume_constraint_value(c, positions);
  return 0.5 * c.stiffness * value * value;
}

Vector3 volume_force_linear(const VolumeConstraint& c, std::span<const Vector3> positions) {
  const double v0 = c.rest_volume;
  const double scale = c.stiffness / (6.0 * v0 * v0) * (current_volume(c, positions) - v0);
  return scale * opposite_face_normal(c, positions);
}

Vector3 volume_force_nonlinear(const VolumeConstraint& c, std::span<const Vector3> positions,
                               BarrierForm form) {
  const double volume = current_volume(c, positions);
  if (std::abs(volume) <= kCollapsedVolume) {
    throw GeometryError("tetrahedron collapsed: |V| <= 1e-12");
  }
  const double bracket = barrier_bracket(volume, c.rest_volume, std::abs(volume), form);
  return (c.stiffness * bracket) * opposite_face_normal(c, positions);
}

Vector3 volume_force(const VolumeConstraint& c, std::span<const Vector3> positions) {
  if (c.mode == VolumeMode::linear) return volume_force_linear(c, positions);
  const double volume = current_volume(c, positions);
  const double floor = kBarrierClamp * std::abs(c.rest_volume);
  const BarrierForm form =
      c.mode == VolumeMode::as_printed ? BarrierForm::as_printed : BarrierForm::barrier_only;
  const double bracket =
      barrier_bracket(volume, c.rest_volume, std::max(std::abs(volume), floor), form);
  return (c.stiffness * bracket) * opposite_face_normal(c, positions);
}

VolumeConstraint rotated_to(const VolumeConstraint& c, int slot) {
  VolumeConstraint r = c;
  switch (slot) {
    case 0:
      break;
    case 1:
      r.i = c.j, r.j = c.i, r.k = c.l, r.l = c.k;
      break;
    case 2:
      r.i = c.k, r.j = c.l, r.k = c.i, r.l = c.j;
      break;
    case 3:
      r.i = c.l, r.j = c.k, r.k = c.j, r.l = c.i;
      break;
    default:
      throw PreconditionError("rotated_to: slot must be 0..3");
  }
  return r;
}

TorsionAngles torsion_angles(const TorsionConstraint& c, std::span<const Vector3> p) {
  const Vector3 seg_ij = p[c.j] - p[c.i];
  const Vector3 seg_jk = p[c.k] - p[c.j];
  const double len_ij = norm(seg_ij);
  const double len_jk = norm(seg_jk);
  if (len_ij <= kDegenerateLength || len_jk <= kDegenerateLength) {
    throw GeometryError("torsion: spine segment has zero length");
  }
  TorsionAngles a;
  a.u_ij = angle_about_axis(p[c.qi] - p[c.i], p[c.qj] - p[c.j], seg_ij / len_ij);
  a.u_jk = angle_about_axis(p[c.qj] - p[c.j], p[c.qk] - p[c.k], seg_jk / len_jk);
  a.lambda = len_ij / (len_ij + len_jk);
  return a;
}

UnitQuaternion torsion_quaternion(const TorsionConstraint& c, std::span<const Vector3> p) {
  const TorsionAngles a = torsion_angles(c, p);
  const Vector3 axis_ij = normalized(p[c.j] - p[c.i]);
  const Vector3 axis_jk = normalized(p[c.k] - p[c.j]);
  const UnitQuaternion q_ij = quat_from_axis_angle(axis_ij, 0.5 * wrap_angle(c.rest_angle_ij - a.u_ij));
  const UnitQuaternion q_jk = quat_from_axis_angle(axis_jk, 0.5 * wrap_angle(c.rest_angle_jk - a.u_jk));
  return slerp(q_ij, conjugate(q_jk), a.lambda);
}

Vector3 torsion_force(const TorsionConstraint& c, std::span<const Vector3> p) {
  const UnitQuaternion q = torsion_quaternion(c, p);
  const Vector3 arm = p[c.qj] - p[c.j];
  return c.stiffness * (rotate(q, arm) - arm);
}

Vector3 finite_difference_gradient(const std::function<double(const Vector3&)>& energy,
                                   const Vector3& x, double h) {
  if (!(h > 0.0)) throw PreconditionError("finite_difference_gradient: h must be positive");
  Vector3 g;
  for (int axis = 0; axis < 3; ++axis) {
    Vector3 forward = x;
    Vector3 backward = x;
    forward[axis] += h;
    backward[axis] -= h;
    g[axis] = (energy(forward) - energy(backward)) / (2.0 * h);
  }
  return g;
}

}  // namespace dlo
