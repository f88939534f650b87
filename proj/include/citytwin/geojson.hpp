#pragma once

#include <vector>

#include "citytwin/geo.hpp"
#include "json.hpp"

namespace citytwin {

using Json = nlohmann::json;

enum class GeometryKind { point, polyline, polygon };

/// Point, LineString or Polygon. Polygon rings are stored open.
struct Geometry {
  GeometryKind kind = GeometryKind::point;
  std::vector<GeoPoint> coords;                 // point: 1, polyline: >= 2, polygon: outer ring >= 3
  std::vector<std::vector<GeoPoint>> holes;     // polygon only

  /// Every vertex of every ring.
  std::vector<GeoPoint> vertices() const;
  GeoBBox bbox() const;
  GeoPolygon as_polygon() const { return {coords, holes}; }

  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Parsers throw Errc::validation with a short reason.
GeoPoint parse_position(const Json& j);
Geometry parse_geometry(const Json& j);
/// Polygon or MultiPolygon as a list of polygons.
std::vector<GeoPolygon> parse_polygons(const Json& j);

Json to_geojson(const Geometry& g);
Json to_geojson(const GeoPolygon& p);
Json position_json(const GeoPoint& p);
Json linestring_json(const std::vector<GeoPoint>& line);

/// Reads and parses a JSON file; throws Errc::io / Errc::validation.
Json read_json_file(const std::string& path);

}  // namespace citytwin
