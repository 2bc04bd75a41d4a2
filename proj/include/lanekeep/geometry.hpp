#pragma once

#include <cmath>
#include <numbers>

namespace lanekeep {

struct Vec2 {
  double x{};
  double y{};

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 unit(double heading) { return {std::cos(heading), std::sin(heading)}; }
inline Vec2 left_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

/// Maps an angle to (-pi, pi].
double wrap_angle(double a);

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }

}  // namespace lanekeep
