#pragma once

#include <cmath>

namespace dlo {

struct Vector3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vector3() = default;
  constexpr Vector3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vector3& operator+=(const Vector3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vector3& operator-=(const Vector3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vector3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr bool operator==(const Vector3&, const Vector3&) = default;
};

constexpr Vector3 operator+(Vector3 a, const Vector3& b) { return a += b; }
constexpr Vector3 operator-(Vector3 a, const Vector3& b) { return a -= b; }
constexpr Vector3 operator-(const Vector3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vector3 operator*(Vector3 a, double s) { return a *= s; }
constexpr Vector3 operator*(double s, Vector3 a) { return a *= s; }
constexpr Vector3 operator/(const Vector3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }

constexpr double dot(const Vector3& a, const Vector3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vector3 cross(const Vector3& a, const Vector3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vector3& a) { return std::sqrt(dot(a, a)); }
constexpr double norm_squared(const Vector3& a) { return dot(a, a); }

/// Throws GeometryError when ‖a‖ < 1e-12.
Vector3 normalized(const Vector3& a);

inline bool is_finite(const Vector3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

struct UnitQuaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static constexpr UnitQuaternion identity() { return {}; }

  friend constexpr bool operator==(const UnitQuaternion&, const UnitQuaternion&) = default;
};

constexpr UnitQuaternion conjugate(const UnitQuaternion& q) { return {q.w, -q.x, -q.y, -q.z}; }

constexpr double dot(const UnitQuaternion& a, const UnitQuaternion& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

/// Hamilton product; renormalized so the unit invariant survives chains of products.
UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b);

/// Rotation by `angle` radians about `axis`. The axis must be unit length within 1e-9
/// (PreconditionError otherwise).
UnitQuaternion quat_from_axis_angle(const Vector3& axis, double angle);

/// Rotation angle in [0, π] of q, treating q and -q as the same rotation.
double rotation_angle(const UnitQuaternion& q);

Vector3 rotate(const UnitQuaternion& q, const Vector3& v);

/// Spherical linear interpolation along the shorter arc. Falls back to normalized
/// lerp when the endpoints are within 1e-7 of parallel.
UnitQuaternion slerp(const UnitQuaternion& qa, UnitQuaternion qb, double t);

/// Signed angle in (-π, π] from the projection of `a` to the projection of `b` onto the
/// plane orthogonal to `axis`, right-handed about `axis`.
double angle_about_axis(const Vector3& a, const Vector3& b, const Vector3& axis);

}  // namespace dlo
