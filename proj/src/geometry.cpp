#include "hilt/geometry.hpp"

#include <cctype>
#include <cstdio>
#include <stdexcept>

namespace hilt {

double wrap_heading(double heading_deg) {
  double h = std::fmod(heading_deg, 360.0);
  if (h < 0.0) h += 360.0;
  return h;
}

double heading_of(const Vec3& direction) {
  return wrap_heading(std::atan2(direction.x, direction.y) / kDegToRad);
}

double heading_difference(double a_deg, double b_deg) {
  double d = wrap_heading(a_deg - b_deg);
  if (d > 180.0) d -= 360.0;
  return d;
}

bool is_canonical_runway(std::string_view token) {
  if (token.size() != 2 && token.size() != 3) return false;
  if (!std::isdigit(static_cast<unsigned char>(token[0])) ||
      !std::isdigit(static_cast<unsigned char>(token[1]))) {
    return false;
  }
  const int number = (token[0] - '0') * 10 + (token[1] - '0');
  if (number < 1 || number > 36) return false;
  if (token.size() == 3 && token[2] != 'L' && token[2] != 'C' && token[2] != 'R') return false;
  return true;
}

std::optional<std::string> canonical_runway(std::string_view token) {
  if (!is_canonical_runway(token)) return std::nullopt;
  return std::string(token);
}

int runway_number(std::string_view token) {
  if (!is_canonical_runway(token)) throw std::invalid_argument("not a runway token: " + std::string(token));
  return (token[0] - '0') * 10 + (token[1] - '0');
}

std::string reciprocal_runway(std::string_view token) {
  int n = runway_number(token) + 18;
  if (n > 36) n -= 36;
  char buf[4];
  std::snprintf(buf, sizeof buf, "%02d", n);
  std::string out(buf);
  if (token.size() == 3) {
    const char side = token[2];
    out += side == 'L' ? 'R' : side == 'R' ? 'L' : 'C';
  }
  return out;
}

Vec3 Runway::direction(std::string_view token) const {
  Vec3 d = flat(high_threshold - low_threshold);
  const double len = norm_xy(d);
  d = d * (1.0 / len);
  return token == high_end ? d * -1.0 : d;
}

double Runway::along(const Vec3& p) const {
  return dot(flat(p - low_threshold), direction(low_end));
}

double Runway::cross_track(const Vec3& p) const {
  const Vec3 d = direction(low_end);
  const Vec3 right{d.y, -d.x, 0.0};
  return dot(flat(p - low_threshold), right);
}

Vec3 Runway::point_at(double along_m, double cross_m) const {
  const Vec3 d = direction(low_end);
  const Vec3 right{d.y, -d.x, 0.0};
  return low_threshold + d * along_m + right * cross_m;
}

bool Runway::in_protected_area(const Vec3& p, double lateral_margin_m) const {
  const double a = along(p);
  if (a < 0.0 || a > length()) return false;
  return std::abs(cross_track(p)) <= width_m / 2.0 + lateral_margin_m;
}

}  // namespace hilt
