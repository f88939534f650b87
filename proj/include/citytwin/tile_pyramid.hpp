#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "citytwin/geo.hpp"

namespace citytwin {

/// Slippy-map tile address. y grows southward (OSM convention).
struct TileId {
  int z = 0;
  std::uint32_t x = 0;
  std::uint32_t y = 0;

  bool valid() const;
  std::string to_string() const;

  friend auto operator<=>(const TileId&, const TileId&) = default;
};

struct TileIdHash {
  size_t operator()(const TileId& t) const noexcept {
    std::uint64_t k = (std::uint64_t(t.z) << 58) ^ (std::uint64_t(t.x) << 29) ^ std::uint64_t(t.y);
    return std::hash<std::uint64_t>{}(k);
  }
};

inline constexpr int kMaxZoom = 29;
/// Zoom of the canonical building tileset.
inline constexpr int kBuildingZoom = 18;

// Web Mercator normalised to the unit square: u in [0,1) eastward, v in
// [0,1) southward.
double lon_to_unit(double lon);
double lat_to_unit(double lat);
double unit_to_lon(double u);
double unit_to_lat(double v);

/// Throws Errc::range when the latitude is outside the Mercator square.
TileId tile_for_point(const GeoPoint& p, int z);
/// Throws Errc::no_parent at z = 0.
TileId parent(const TileId& t);
std::array<TileId, 4> children(const TileId& t);
/// Throws Errc::ordering when z_target > t.z.
TileId ancestor_at(const TileId& t, int z_target);
/// Row-major over the target level. Throws Errc::ordering when z_target < t.z.
std::vector<TileId> descendants_at(const TileId& t, int z_target);
/// True when `a` is `b` or one of its ancestors.
bool is_ancestor_or_self(const TileId& a, const TileId& b);

GeoBBox tile_bounds(const TileId& t);
/// Half-open membership: the point belongs to exactly one tile per level.
bool tile_contains(const TileId& t, const GeoPoint& p);

/// Area-weighted centroid of the outer ring minus holes; vertex mean when
/// the area vanishes. Independent of ring orientation and starting vertex.
GeoPoint footprint_centroid(const GeoPolygon& footprint);
TileId assign_to_tile(const GeoPolygon& footprint, int z = kBuildingZoom);

struct ViewFrustum {
  GeoPoint camera;
  double heading_deg = 0.0;  ///< clockwise from north
  double pitch_deg = 0.0;    ///< 0 = looking straight down
  int base_zoom = 16;
  int falloff = 0;           ///< number of coarser levels allowed far away
  double viewport_px = 1024.0;
};

struct ViewTile {
  TileId tile;
  int band = 0;           ///< base_zoom - tile.z
  double distance = 0.0;  ///< nearest depth inside the view, unit-square units
};

/// Ground footprint of the view in (lon, lat): near-left, near-right,
/// far-right, far-left. A square centred on the camera at pitch 0; the far
/// edge moves out and widens by 1 + 2 tan(pitch) (pitch clamped to 75°).
std::array<GeoPoint, 4> view_trapezoid(const ViewFrustum& v);

/// Variable-zoom cover of the view trapezoid, ordered near to far. Bands are
/// one view-height of ground distance deep; band b is served at
/// base_zoom - min(b, falloff). Tiles never overlap each other.
std::vector<ViewTile> tiles_in_view(const ViewFrustum& v);

}  // namespace citytwin
