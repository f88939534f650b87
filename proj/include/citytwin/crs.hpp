#pragma once

#include <string>

#include "citytwin/geo.hpp"

namespace citytwin {

/// Projected coordinates in metres.
struct Projected {
  double easting = 0.0;
  double northing = 0.0;
};

/// Monte Mario / Italy zone 1 (EPSG:3003) to WGS84: inverse transverse
/// Mercator on the International 1924 ellipsoid followed by a seven-parameter
/// datum shift. Horizontal accuracy is that of the published shift (~1-2 m).
GeoPoint epsg3003_to_wgs84(const Projected& p);
Projected wgs84_to_epsg3003(const GeoPoint& p);

/// Supported source systems for ingestion: "EPSG:4326" (identity) and
/// "EPSG:3003". Throws Errc::config for anything else.
GeoPoint to_wgs84(const std::string& crs, double x, double y);
bool is_supported_crs(const std::string& crs);

}  // namespace citytwin
