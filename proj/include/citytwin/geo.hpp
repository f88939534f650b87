#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <span>
#include <vector>

namespace citytwin {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEarthRadiusM = 6378137.0;
/// Latitude limit of the square Web Mercator plane.
inline constexpr double kMaxLatitude = 85.05112877980659;

inline constexpr double deg2rad(double d) { return d * kPi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct GeoBBox {
  double min_lon = 0.0;
  double min_lat = 0.0;
  double max_lon = 0.0;
  double max_lat = 0.0;

  bool valid() const {
    return std::isfinite(min_lon) && std::isfinite(min_lat) && std::isfinite(max_lon) &&
           std::isfinite(max_lat) && min_lon <= max_lon && min_lat <= max_lat;
  }
  /// Closed-interval containment.
  bool contains(const GeoPoint& p) const {
    return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
  }
  bool intersects(const GeoBBox& o) const {
    return !(o.max_lon < min_lon || o.min_lon > max_lon || o.max_lat < min_lat ||
             o.min_lat > max_lat);
  }
  void extend(const GeoPoint& p) {
    min_lon = std::min(min_lon, p.lon);
    max_lon = std::max(max_lon, p.lon);
    min_lat = std::min(min_lat, p.lat);
    max_lat = std::max(max_lat, p.lat);
  }
  static GeoBBox empty() { return {INFINITY, INFINITY, -INFINITY, -INFINITY}; }

  friend bool operator==(const GeoBBox&, const GeoBBox&) = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

/// Great-circle distance on the WGS84 mean sphere.
double haversine_m(const GeoPoint& a, const GeoPoint& b);

/// Equirectangular tangent frame: metres east/north of an origin. Affine in
/// (lon, lat), so centroids and areas ratios are preserved exactly.
class LocalFrame {
 public:
  explicit LocalFrame(GeoPoint origin);

  Vec2 to_local(const GeoPoint& p) const {
    return {(p.lon - origin_.lon) * m_per_deg_lon_, (p.lat - origin_.lat) * m_per_deg_lat_};
  }
  GeoPoint to_geo(const Vec2& v) const {
    return {origin_.lon + v.x / m_per_deg_lon_, origin_.lat + v.y / m_per_deg_lat_};
  }
  const GeoPoint& origin() const { return origin_; }

 private:
  GeoPoint origin_;
  double m_per_deg_lon_;
  double m_per_deg_lat_;
};

// Planar ring helpers. Rings are open (the closing vertex is implicit).

double signed_area(std::span<const Vec2> ring);
/// Area-weighted centroid; undefined for zero-area rings.
Vec2 area_centroid(std::span<const Vec2> ring);
/// Crossing-number test; boundary points may land on either side.
bool point_in_ring(Vec2 p, std::span<const Vec2> ring);
bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d);
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

/// Polygon with holes in geographic coordinates.
struct GeoPolygon {
  std::vector<GeoPoint> outer;
  std::vector<std::vector<GeoPoint>> holes;

  GeoBBox bbox() const;
};

/// Drops a repeated closing vertex, if present.
std::vector<GeoPoint> open_ring(std::vector<GeoPoint> ring);

/// Points strictly inside holes are outside the polygon.
bool point_in_polygon(const GeoPoint& p, const GeoPolygon& poly);

}  // namespace citytwin
