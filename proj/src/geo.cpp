#include "citytwin/geo.hpp"

#include <algorithm>

#include "citytwin/error.hpp"

namespace citytwin {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::range: return "range";
    case Errc::no_parent: return "no_parent";
    case Errc::ordering: return "ordering";
    case Errc::shape: return "shape";
    case Errc::empty_tile: return "empty_tile";
    case Errc::not_found: return "not_found";
    case Errc::validation: return "validation";
    case Errc::insufficient_data: return "insufficient_data";
    case Errc::geometry: return "geometry";
    case Errc::config: return "config";
    case Errc::no_route: return "no_route";
    case Errc::blocked_by_scenario: return "blocked_by_scenario";
    case Errc::no_nearby_road: return "no_nearby_road";
    case Errc::fetch_failed: return "fetch_failed";
    case Errc::io: return "io";
    case Errc::unauthorized: return "unauthorized";
    case Errc::bad_request: return "bad_request";
  }
  return "unknown";
}

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  const double p1 = deg2rad(a.lat);
  const double p2 = deg2rad(b.lat);
  const double dp = p2 - p1;
  const double dl = deg2rad(b.lon - a.lon);
  const double h =
      std::sin(dp / 2) * std::sin(dp / 2) + std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

LocalFrame::LocalFrame(GeoPoint origin)
    : origin_(origin),
      m_per_deg_lon_(deg2rad(1.0) * kEarthRadiusM * std::cos(deg2rad(origin.lat))),
      m_per_deg_lat_(deg2rad(1.0) * kEarthRadiusM) {}

double signed_area(std::span<const Vec2> ring) {
  const size_t n = ring.size();
  if (n < 3) return 0.0;
  // Relative to the first vertex to limit cancellation on geographic input.
  const Vec2 o = ring[0];
  double twice = 0.0;
  for (size_t i = 1; i + 1 < n; ++i) twice += cross(ring[i] - o, ring[i + 1] - o);
  return 0.5 * twice;
}

Vec2 area_centroid(std::span<const Vec2> ring) {
  const size_t n = ring.size();
  const Vec2 o = ring[0];
  double a2 = 0.0, cx = 0.0, cy = 0.0;
  for (size_t i = 1; i + 1 < n; ++i) {
    const Vec2 p = ring[i] - o;
    const Vec2 q = ring[i + 1] - o;
    const double c = cross(p, q);
    a2 += c;
    cx += (p.x + q.x) * c;
    cy += (p.y + q.y) * c;
  }
  return {o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)};
}

bool point_in_ring(Vec2 p, std::span<const Vec2> ring) {
  bool inside = false;
  const size_t n = ring.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = ring[i];
    const Vec2& b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

namespace {
int orient(Vec2 a, Vec2 b, Vec2 c) {
  const double v = cross(b - a, c - a);
  return (v > 0) - (v < 0);
}
bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}
}  // namespace

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 q = a + t * ab;
  return std::hypot(p.x - q.x, p.y - q.y);
}

GeoBBox GeoPolygon::bbox() const {
  GeoBBox b = GeoBBox::empty();
  for (const auto& p : outer) b.extend(p);
  return b;
}

std::vector<GeoPoint> open_ring(std::vector<GeoPoint> ring) {
  if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
  return ring;
}

namespace {
std::vector<Vec2> as_plane(const std::vector<GeoPoint>& ring) {
  std::vector<Vec2> out;
  out.reserve(ring.size());
  for (const auto& p : ring) out.push_back({p.lon, p.lat});
  return out;
}
}  // namespace

bool point_in_polygon(const GeoPoint& p, const GeoPolygon& poly) {
  if (poly.outer.size() < 3) return false;
  const Vec2 q{p.lon, p.lat};
  if (!point_in_ring(q, as_plane(poly.outer))) return false;
  for (const auto& h : poly.holes)
    if (h.size() >= 3 && point_in_ring(q, as_plane(h))) return false;
  return true;
}

}  // namespace citytwin
