#include "citytwin/tile_pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "citytwin/error.hpp"

namespace citytwin {

bool TileId::valid() const {
  if (z < 0 || z > kMaxZoom) return false;
  const std::uint64_t n = std::uint64_t{1} << z;
  return x < n && y < n;
}

std::string TileId::to_string() const {
  return std::to_string(z) + "/" + std::to_string(x) + "/" + std::to_string(y);
}

double lon_to_unit(double lon) { return (lon + 180.0) / 360.0; }

double lat_to_unit(double lat) {
  const double phi = deg2rad(lat);
  return (1.0 - std::log(std::tan(phi) + 1.0 / std::cos(phi)) / kPi) / 2.0;
}

double unit_to_lon(double u) { return u * 360.0 - 180.0; }

double unit_to_lat(double v) { return rad2deg(std::atan(std::sinh(kPi * (1.0 - 2.0 * v)))); }

TileId tile_for_point(const GeoPoint& p, int z) {
  if (z < 0 || z > kMaxZoom) throw Error(Errc::range, "zoom out of range: " + std::to_string(z));
  if (!(std::abs(p.lat) <= kMaxLatitude) || !std::isfinite(p.lon))
    throw Error(Errc::range, "latitude outside Web Mercator range: " + std::to_string(p.lat));
  const double n = std::ldexp(1.0, z);
  const double top = n - 1.0;
  const double fx = std::clamp(std::floor(lon_to_unit(p.lon) * n), 0.0, top);
  const double fy = std::clamp(std::floor(lat_to_unit(p.lat) * n), 0.0, top);
  return {z, static_cast<std::uint32_t>(fx), static_cast<std::uint32_t>(fy)};
}

TileId parent(const TileId& t) {
  if (t.z <= 0) throw Error(Errc::no_parent, "tile " + t.to_string() + " has no parent");
  return {t.z - 1, t.x / 2, t.y / 2};
}

std::array<TileId, 4> children(const TileId& t) {
  const int z = t.z + 1;
  return {TileId{z, 2 * t.x, 2 * t.y}, TileId{z, 2 * t.x + 1, 2 * t.y},
          TileId{z, 2 * t.x, 2 * t.y + 1}, TileId{z, 2 * t.x + 1, 2 * t.y + 1}};
}

TileId ancestor_at(const TileId& t, int z_target) {
  if (z_target > t.z || z_target < 0)
    throw Error(Errc::ordering, "ancestor zoom " + std::to_string(z_target) + " not above " + t.to_string());
  const int dz = t.z - z_target;
  return {z_target, t.x >> dz, t.y >> dz};
}

std::vector<TileId> descendants_at(const TileId& t, int z_target) {
  if (z_target < t.z || z_target > kMaxZoom)
    throw Error(Errc::ordering, "descendant zoom " + std::to_string(z_target) + " not below " + t.to_string());
  const int dz = z_target - t.z;
  const std::uint32_t side = std::uint32_t{1} << dz;
  std::vector<TileId> out;
  out.reserve(std::size_t{side} * side);
  for (std::uint32_t dy = 0; dy < side; ++dy)
    for (std::uint32_t dx = 0; dx < side; ++dx)
      out.push_back({z_target, (t.x << dz) + dx, (t.y << dz) + dy});
  return out;
}

bool is_ancestor_or_self(const TileId& a, const TileId& b) {
  if (a.z > b.z) return false;
  const int dz = b.z - a.z;
  return (b.x >> dz) == a.x && (b.y >> dz) == a.y;
}

GeoBBox tile_bounds(const TileId& t) {
  const double n = std::ldexp(1.0, t.z);
  return {unit_to_lon(t.x / n), unit_to_lat((t.y + 1) / n), unit_to_lon((t.x + 1) / n),
          unit_to_lat(t.y / n)};
}

bool tile_contains(const TileId& t, const GeoPoint& p) {
  if (!(std::abs(p.lat) <= kMaxLatitude)) return false;
  return tile_for_point(p, t.z) == t;
}

namespace {

// Canonical form: CCW, starting at the lexicographically smallest vertex, so
// floating-point sums do not depend on how the caller listed the ring.
std::vector<Vec2> canonical_ring(const std::vector<GeoPoint>& ring, bool ccw) {
  std::vector<Vec2> pts;
  for (const auto& p : open_ring(ring)) pts.push_back({p.lon, p.lat});
  if (pts.size() < 3) return pts;
  if ((signed_area(pts) > 0) != ccw) std::reverse(pts.begin(), pts.end());
  auto lex = [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); };
  std::rotate(pts.begin(), std::min_element(pts.begin(), pts.end(), lex), pts.end());
  return pts;
}

}  // namespace

GeoPoint footprint_centroid(const GeoPolygon& footprint) {
  auto outer = canonical_ring(footprint.outer, true);
  if (outer.empty()) throw Error(Errc::geometry, "footprint has no vertices");

  double area = signed_area(outer);
  Vec2 moment{0, 0};
  if (area > 0) moment = area * area_centroid(outer);
  for (const auto& h : footprint.holes) {
    auto hole = canonical_ring(h, true);
    const double ha = signed_area(hole);
    if (ha <= 0) continue;
    const Vec2 hc = area_centroid(hole);
    moment = moment - ha * hc;
    area -= ha;
  }
  const double scale = std::max(std::abs(outer[0].x), 1.0) * std::max(std::abs(outer[0].y), 1.0);
  if (area > 1e-18 * scale) return {moment.x / area, moment.y / area};

  Vec2 mean{0, 0};
  for (const auto& p : outer) mean = mean + p;
  return {mean.x / outer.size(), mean.y / outer.size()};
}

TileId assign_to_tile(const GeoPolygon& footprint, int z) {
  return tile_for_point(footprint_centroid(footprint), z);
}

// ---------------------------------------------------------------------------
// View coverage

namespace {

struct ViewGeometry {
  Vec2 center;
  Vec2 forward;
  Vec2 right;
  double half_width;  // unit-square units
  double stretch;
  std::array<Vec2, 4> corners;

  double depth(Vec2 p) const { return dot(p - center, forward) + half_width; }
};

ViewGeometry make_view(const ViewFrustum& v) {
  if (v.base_zoom < 0 || v.base_zoom > 22) throw Error(Errc::range, "base zoom outside [0, 22]");
  if (v.falloff < 0) throw Error(Errc::range, "falloff must be >= 0");
  ViewGeometry g;
  const double lat = std::clamp(v.camera.lat, -kMaxLatitude, kMaxLatitude);
  g.center = {lon_to_unit(v.camera.lon), lat_to_unit(lat)};
  const double h = deg2rad(v.heading_deg);
  g.forward = {std::sin(h), -std::cos(h)};
  g.right = {std::cos(h), std::sin(h)};
  g.half_width = (v.viewport_px / 2.0) / (256.0 * std::ldexp(1.0, v.base_zoom));
  const double pitch = std::clamp(v.pitch_deg, 0.0, 75.0);
  g.stretch = 1.0 + 2.0 * std::tan(deg2rad(pitch));
  const double w = g.half_width;
  const double far = -w + 2.0 * w * g.stretch;
  const double fw = w * g.stretch;
  g.corners = {g.center + (-w) * g.forward + (-w) * g.right, g.center + (-w) * g.forward + w * g.right,
               g.center + far * g.forward + fw * g.right, g.center + far * g.forward + (-fw) * g.right};
  return g;
}

// Sutherland-Hodgman clip of a convex polygon against an axis-aligned box.
std::vector<Vec2> clip_to_box(std::vector<Vec2> poly, double x0, double y0, double x1, double y1) {
  auto clip = [&](auto inside, auto intersect) {
    std::vector<Vec2> out;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
      const Vec2 a = poly[i];
      const Vec2 b = poly[(i + 1) % n];
      const bool ia = inside(a), ib = inside(b);
      if (ia) out.push_back(a);
      if (ia != ib) out.push_back(intersect(a, b));
    }
    poly = std::move(out);
  };
  auto at_x = [](Vec2 a, Vec2 b, double x) { return Vec2{x, a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x)}; };
  auto at_y = [](Vec2 a, Vec2 b, double y) { return Vec2{a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y), y}; };
  clip([&](Vec2 p) { return p.x >= x0; }, [&](Vec2 a, Vec2 b) { return at_x(a, b, x0); });
  if (poly.empty()) return poly;
  clip([&](Vec2 p) { return p.x <= x1; }, [&](Vec2 a, Vec2 b) { return at_x(a, b, x1); });
  if (poly.empty()) return poly;
  clip([&](Vec2 p) { return p.y >= y0; }, [&](Vec2 a, Vec2 b) { return at_y(a, b, y0); });
  if (poly.empty()) return poly;
  clip([&](Vec2 p) { return p.y <= y1; }, [&](Vec2 a, Vec2 b) { return at_y(a, b, y1); });
  return poly;
}

}  // namespace

std::array<GeoPoint, 4> view_trapezoid(const ViewFrustum& v) {
  const auto g = make_view(v);
  std::array<GeoPoint, 4> out;
  for (size_t i = 0; i < 4; ++i) out[i] = {unit_to_lon(g.corners[i].x), unit_to_lat(g.corners[i].y)};
  return out;
}

std::vector<ViewTile> tiles_in_view(const ViewFrustum& v) {
  const auto g = make_view(v);
  const std::vector<Vec2> trapezoid(g.corners.begin(), g.corners.end());
  const double band_depth = 2.0 * g.half_width;
  const int coarsest = std::max(0, v.base_zoom - v.falloff);

  std::vector<ViewTile> out;
  std::function<void(const TileId&)> visit = [&](const TileId& t) {
    const double n = std::ldexp(1.0, t.z);
    const double x0 = t.x / n, y0 = t.y / n, x1 = (t.x + 1) / n, y1 = (t.y + 1) / n;
    const auto part = clip_to_box(trapezoid, x0, y0, x1, y1);
    if (part.size() < 3) return;
    // Touching along an edge or a corner is not an overlap.
    if (std::abs(signed_area(part)) <= 1e-9 * (x1 - x0) * (y1 - y0)) return;

    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& p : part) nearest = std::min(nearest, g.depth(p));
    nearest = std::max(nearest, 0.0);
    const int band = std::min(static_cast<int>(std::floor(nearest / band_depth)), v.falloff);
    const int wanted = v.base_zoom - band;
    if (wanted > t.z) {
      for (const auto& c : children(t)) visit(c);
      return;
    }
    out.push_back({t, v.base_zoom - t.z, nearest});
  };

  const double n = std::ldexp(1.0, coarsest);
  double umin = 1, umax = 0, vmin = 1, vmax = 0;
  for (const auto& c : g.corners) {
    umin = std::min(umin, c.x), umax = std::max(umax, c.x);
    vmin = std::min(vmin, c.y), vmax = std::max(vmax, c.y);
  }
  const auto lo = [&](double u) { return static_cast<std::int64_t>(std::clamp(std::floor(u * n), 0.0, n - 1)); };
  for (std::int64_t ty = lo(vmin); ty <= lo(vmax); ++ty)
    for (std::int64_t tx = lo(umin); tx <= lo(umax); ++tx)
      visit({coarsest, static_cast<std::uint32_t>(tx), static_cast<std::uint32_t>(ty)});

  std::sort(out.begin(), out.end(), [](const ViewTile& a, const ViewTile& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.tile < b.tile;
  });
  return out;
}

}  // namespace citytwin
