#pragma once

#include <algorithm>
#include <cmath>

namespace adfi {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator-() const { return {-x, -y}; }
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
};

inline Vec2 operator*(double s, const Vec2& v) { return {v.x * s, v.y * s}; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
// cross(scalar, vector) and cross(vector, scalar) per the usual 2D conventions.
inline Vec2 cross(double s, const Vec2& v) { return {-s * v.y, s * v.x}; }
inline Vec2 cross(const Vec2& v, double s) { return {s * v.y, -s * v.x}; }
inline Vec2 abs(const Vec2& v) { return {std::abs(v.x), std::abs(v.y)}; }
inline double length(const Vec2& v) { return std::sqrt(v.x * v.x + v.y * v.y); }

// Column-major 2x2 rotation/basis matrix.
struct Mat22 {
  Vec2 col1{1.0, 0.0};
  Vec2 col2{0.0, 1.0};

  Mat22() = default;
  Mat22(const Vec2& c1, const Vec2& c2) : col1(c1), col2(c2) {}
  explicit Mat22(double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    col1 = {c, s};
    col2 = {-s, c};
  }

  Mat22 transpose() const { return {{col1.x, col2.x}, {col1.y, col2.y}}; }

  Vec2 operator*(const Vec2& v) const {
    return {col1.x * v.x + col2.x * v.y, col1.y * v.x + col2.y * v.y};
  }
  Mat22 operator*(const Mat22& m) const { return {(*this) * m.col1, (*this) * m.col2}; }
};

inline Mat22 abs(const Mat22& m) { return {abs(m.col1), abs(m.col2)}; }

struct Aabb {
  Vec2 min;
  Vec2 max;

  bool well_formed() const { return min.x <= max.x && min.y <= max.y; }
  bool overlaps(const Aabb& o) const {
    return min.x <= o.max.x && o.min.x <= max.x && min.y <= o.max.y && o.min.y <= max.y;
  }
  bool contains(const Aabb& o) const {
    return o.min.x >= min.x && o.max.x <= max.x && o.min.y >= min.y && o.max.y <= max.y;
  }
  Aabb inflated(double r) const { return {{min.x - r, min.y - r}, {max.x + r, max.y + r}}; }
  void merge(const Aabb& o) {
    min.x = std::min(min.x, o.min.x);
    min.y = std::min(min.y, o.min.y);
    max.x = std::max(max.x, o.max.x);
    max.y = std::max(max.y, o.max.y);
  }
};

enum class Containment { Inside, Intersecting, Outside };

// Classifies `inner` relative to `outer`.
inline Containment classify(const Aabb& inner, const Aabb& outer) {
  if (outer.contains(inner)) return Containment::Inside;
  if (outer.overlaps(inner)) return Containment::Intersecting;
  return Containment::Outside;
}

}  // namespace adfi
