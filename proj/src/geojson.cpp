#include "citytwin/geojson.hpp"

#include <fstream>
#include <sstream>

#include "citytwin/error.hpp"

namespace citytwin {

std::vector<GeoPoint> Geometry::vertices() const {
  std::vector<GeoPoint> out = coords;
  for (const auto& h : holes) out.insert(out.end(), h.begin(), h.end());
  return out;
}

GeoBBox Geometry::bbox() const {
  GeoBBox b = GeoBBox::empty();
  for (const auto& p : vertices()) b.extend(p);
  return b;
}

GeoPoint parse_position(const Json& j) {
  if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number())
    throw Error(Errc::validation, "position must be [lon, lat]");
  const GeoPoint p{j[0].get<double>(), j[1].get<double>()};
  if (!std::isfinite(p.lon) || !std::isfinite(p.lat) || p.lon < -180 || p.lon > 180 || p.lat <= -kMaxLatitude ||
      p.lat >= kMaxLatitude)
    throw Error(Errc::validation, "position outside the Web Mercator range");
  return p;
}

namespace {

std::vector<GeoPoint> parse_line(const Json& j) {
  if (!j.is_array()) throw Error(Errc::validation, "coordinates must be an array");
  std::vector<GeoPoint> out;
  out.reserve(j.size());
  for (const auto& c : j) out.push_back(parse_position(c));
  return out;
}

std::vector<GeoPoint> parse_ring(const Json& j) {
  auto ring = open_ring(parse_line(j));
  if (ring.size() < 3) throw Error(Errc::validation, "polygon ring needs at least 3 distinct vertices");
  return ring;
}

GeoPolygon parse_polygon_coords(const Json& j) {
  if (!j.is_array() || j.empty()) throw Error(Errc::validation, "polygon needs an outer ring");
  GeoPolygon p;
  p.outer = parse_ring(j[0]);
  for (std::size_t k = 1; k < j.size(); ++k) p.holes.push_back(parse_ring(j[k]));
  return p;
}

const Json& coordinates_of(const Json& j) {
  if (!j.is_object() || !j.contains("type") || !j.contains("coordinates"))
    throw Error(Errc::validation, "geometry needs type and coordinates");
  return j["coordinates"];
}

}  // namespace

Geometry parse_geometry(const Json& j) {
  const Json& c = coordinates_of(j);
  const std::string type = j["type"].is_string() ? j["type"].get<std::string>() : "";
  Geometry g;
  if (type == "Point") {
    g.kind = GeometryKind::point;
    g.coords = {parse_position(c)};
  } else if (type == "LineString") {
    g.kind = GeometryKind::polyline;
    g.coords = parse_line(c);
    if (g.coords.size() < 2) throw Error(Errc::validation, "LineString needs at least 2 positions");
  } else if (type == "Polygon") {
    g.kind = GeometryKind::polygon;
    auto p = parse_polygon_coords(c);
    g.coords = std::move(p.outer);
    g.holes = std::move(p.holes);
  } else {
    throw Error(Errc::validation, "unsupported geometry type '" + type + "'");
  }
  return g;
}

std::vector<GeoPolygon> parse_polygons(const Json& j) {
  const Json& c = coordinates_of(j);
  const std::string type = j["type"].is_string() ? j["type"].get<std::string>() : "";
  if (type == "Polygon") return {parse_polygon_coords(c)};
  if (type == "MultiPolygon") {
    if (!c.is_array() || c.empty()) throw Error(Errc::validation, "empty MultiPolygon");
    std::vector<GeoPolygon> out;
    for (const auto& p : c) out.push_back(parse_polygon_coords(p));
    return out;
  }
  throw Error(Errc::validation, "expected Polygon or MultiPolygon, got '" + type + "'");
}

Json position_json(const GeoPoint& p) { return Json::array({p.lon, p.lat}); }

Json linestring_json(const std::vector<GeoPoint>& line) {
  Json coords = Json::array();
  for (const auto& p : line) coords.push_back(position_json(p));
  return {{"type", "LineString"}, {"coordinates", coords}};
}

namespace {
Json closed_ring(const std::vector<GeoPoint>& ring) {
  Json out = Json::array();
  for (const auto& p : ring) out.push_back(position_json(p));
  if (!ring.empty()) out.push_back(position_json(ring.front()));
  return out;
}
}  // namespace

Json to_geojson(const GeoPolygon& p) {
  Json rings = Json::array({closed_ring(p.outer)});
  for (const auto& h : p.holes) rings.push_back(closed_ring(h));
  return {{"type", "Polygon"}, {"coordinates", rings}};
}

Json to_geojson(const Geometry& g) {
  switch (g.kind) {
    case GeometryKind::point: return {{"type", "Point"}, {"coordinates", position_json(g.coords.at(0))}};
    case GeometryKind::polyline: return linestring_json(g.coords);
    case GeometryKind::polygon: return to_geojson(g.as_polygon());
  }
  return nullptr;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw Error(Errc::validation, path + ": " + e.what());
  }
}

}  // namespace citytwin
