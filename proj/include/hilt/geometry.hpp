#pragma once

// Local flat-earth scene frame (meters; x east, y north, z up) and runway
// helpers. Headings are degrees clockwise from north.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace hilt {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  bool operator==(const Vec3&) const = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double norm_xy(const Vec3& a) { return std::hypot(a.x, a.y); }
inline Vec3 flat(const Vec3& a) { return {a.x, a.y, 0.0}; }

constexpr double kDegToRad = 0.017453292519943295;

/// Unit horizontal vector for a compass heading.
inline Vec3 heading_vector(double heading_deg) {
  const double r = heading_deg * kDegToRad;
  return {std::sin(r), std::cos(r), 0.0};
}

double heading_of(const Vec3& direction);
/// Wraps to [0, 360).
double wrap_heading(double heading_deg);
/// Signed smallest difference a - b in (-180, 180].
double heading_difference(double a_deg, double b_deg);

// ---------------------------------------------------------------------------
// Runway tokens: "01".."36" with optional L/C/R suffix.

bool is_canonical_runway(std::string_view token);
/// "1" -> nullopt (not canonical), "01" -> "01", "19R" -> "19R".
std::optional<std::string> canonical_runway(std::string_view token);
/// (number + 18) mod 36 with L<->R swapped; "15" -> "33", "36" -> "18".
std::string reciprocal_runway(std::string_view token);
int runway_number(std::string_view token);

/// A strip of pavement with two named ends, e.g. "01/19".
struct Runway {
  std::string id;       // "01/19"
  std::string low_end;  // "01"
  std::string high_end; // "19"
  Vec3 low_threshold;   // where aircraft using `low_end` start/touch down
  Vec3 high_threshold;
  double width_m = 45.0;

  bool has_end(std::string_view token) const { return token == low_end || token == high_end; }
  double length() const { return norm_xy(high_threshold - low_threshold); }
  /// Direction of travel when using `token` (unit, horizontal).
  Vec3 direction(std::string_view token) const;
  double heading(std::string_view token) const { return heading_of(direction(token)); }
  const Vec3& threshold(std::string_view token) const {
    return token == high_end ? high_threshold : low_threshold;
  }
  /// Along-track (from the low threshold) and signed cross-track (right of the
  /// low_end direction positive) coordinates of p.
  double along(const Vec3& p) const;
  double cross_track(const Vec3& p) const;
  Vec3 point_at(double along_m, double cross_m = 0.0) const;

  /// Runway rectangle dilated laterally by `lateral_margin_m`.
  bool in_protected_area(const Vec3& p, double lateral_margin_m) const;
};

}  // namespace hilt
