#include "dlo/core_math.hpp"

#include <algorithm>
#include <numbers>

#include "dlo/errors.hpp"

namespace dlo {

namespace {

constexpr double kDegenerateLength = 1e-12;
constexpr double kUnitTolerance = 1e-9;
constexpr double kSlerpParallel = 1.0 - 1e-7;

UnitQuaternion normalize(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  return {w / n, x / n, y / n, z / n};
}

}  // namespace

Vector3 normalized(const Vector3& a) {
  const double n = norm(a);
  if (n < kDegenerateLength) {
    throw GeometryError("cannot normalize a vector of length < 1e-12");
  }
  return a / n;
}

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return normalize(a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
                   a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
                   a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
                   a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w);
}

UnitQuaternion quat_from_axis_angle(const Vector3& axis, double angle) {
  if (std::abs(norm(axis) - 1.0) > kUnitTolerance) {
    throw PreconditionError("quat_from_axis_angle: axis must be unit length");
  }
  const double s = std::sin(0.5 * angle);
  return normalize(std::cos(0.5 * angle), axis.x * s, axis.y * s, axis.z * s);
}

double rotation_angle(const UnitQuaternion& q) {
  return 2.0 * std::acos(std::clamp(std::abs(q.w), 0.0, 1.0));
}

Vector3 rotate(const UnitQuaternion& q, const Vector3& v) {
  // v' = v + 2w (u × v) + 2 u × (u × v), u the vector part.
  const Vector3 u{q.x, q.y, q.z};
  const Vector3 t = 2.0 * cross(u, v);
  return v + q.w * t + cross(u, t);
}

UnitQuaternion slerp(const UnitQuaternion& qa, UnitQuaternion qb, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw PreconditionError("slerp: t must lie in [0, 1]");
  }
  double d = dot(qa, qb);
  if (d < 0.0) {
    qb = {-qb.w, -qb.x, -qb.y, -qb.z};
    d = -d;
  }
  if (d > kSlerpParallel) {
    return normalize(qa.w + t * (qb.w - qa.w), qa.x + t * (qb.x - qa.x),
                     qa.y + t * (qb.y - qa.y), qa.z + t * (qb.z - qa.z));
  }
  const double theta = std::acos(d);
  const double s = std::sin(theta);
  const double ca = std::sin((1.0 - t) * theta) / s;
  const double cb = std::sin(t * theta) / s;
  return normalize(ca * qa.w + cb * qb.w, ca * qa.x + cb * qb.x, ca * qa.y + cb * qb.y,
                   ca * qa.z + cb * qb.z);
}

double angle_about_axis(const Vector3& a, const Vector3& b, const Vector3& axis) {
  const Vector3 pa = a - dot(a, axis) * axis;
  const Vector3 pb = b - dot(b, axis) * axis;
  if (norm(pa) < kDegenerateLength || norm(pb) < kDegenerateLength) {
    throw GeometryError("angle_about_axis: projection onto the axis-normal plane vanishes");
  }
  const double angle = std::atan2(dot(axis, cross(pa, pb)), dot(pa, pb));
  return angle <= -std::numbers::pi ? std::numbers::pi : angle;
}

}  // namespace dlo
