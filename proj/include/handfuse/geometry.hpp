#pragma once

#include <algorithm>
#include <cmath>

namespace handfuse {

/// 3D vector in sensor coordinates. Positions are millimeters,
/// velocities millimeters/second, normals unitless.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Vec3&) const = default;
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline double magnitude(const Vec3& v) {
  return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
}

/// Angle between two vectors: arccos(a.b / |a||b|), result in [0, pi].
/// The cosine ratio is clamped to [-1, 1] before arccos so near-parallel
/// inputs never leave the arccos domain. A zero-magnitude operand yields
/// the 0 sentinel instead of an error.
inline double angle_between(const Vec3& a, const Vec3& b) {
  const double ma = magnitude(a);
  const double mb = magnitude(b);
  if (ma == 0.0 || mb == 0.0) {
    return 0.0;
  }
  const double ratio = std::clamp(dot(a, b) / (ma * mb), -1.0, 1.0);
  return std::acos(ratio);
}

}  // namespace handfuse
