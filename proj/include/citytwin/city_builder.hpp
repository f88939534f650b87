#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "citytwin/geo.hpp"
#include "citytwin/terrain.hpp"
#include "citytwin/tile_pyramid.hpp"

namespace citytwin {

struct Footprint {
  std::string id;
  GeoPolygon polygon;
  std::string name;
  std::optional<double> height_override;  ///< metres, wins over DSM estimates
};

/// Indexed triangle mesh in a local metric frame: x east, y north, z up.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  /// Divergence-theorem volume; positive for outward-facing triangles.
  double signed_volume() const;
  /// Every undirected edge is used exactly twice, once in each direction.
  bool is_closed_manifold() const;
};

enum class Lod { lod1, lod3, custom };
std::string to_string(Lod lod);
/// Inverse of to_string. Throws Errc::validation.
Lod lod_from_string(const std::string& s);

/// Plane n . p = offset in the building's local frame; n is unit length with
/// n.z >= 0.
struct RoofPlane {
  Vec3 normal{0, 0, 1};
  double offset = 0.0;
  std::size_t inliers = 0;
  bool fallback = false;  ///< flat roof at mean height, not a fitted plane

  double height_at(double x, double y) const { return (offset - normal.x * x - normal.y * y) / normal.z; }
};

struct BuildingModel {
  std::string building_id;
  std::string variant_id = "lod1";
  Lod lod = Lod::lod1;
  Mesh mesh;                      ///< metres relative to (anchor, base_elevation)
  GeoPoint anchor;                ///< area centroid of the footprint
  double ground_elevation = 0.0;  ///< terrain at the anchor
  double base_elevation = 0.0;    ///< elevation of mesh z = 0; >= terrain at every footprint vertex
  double height = 0.0;
  std::vector<RoofPlane> roof_planes;
};

struct EntityInstance {
  std::string model_id;
  GeoPoint position;
  double scale = 1.0;
  double rotation_deg = 0.0;
};

/// Ear-clipping triangulation of a simple polygon with holes. Indices refer
/// to the outer ring followed by each hole, in input order. Triangles are
/// counter-clockwise. Throws Errc::geometry when no valid triangulation is
/// found.
std::vector<std::array<std::uint32_t, 3>> triangulate_polygon(std::span<const Vec2> outer,
                                                              std::span<const std::vector<Vec2>> holes);

/// Building height from surface minus terrain, averaged over DSM samples
/// inside the footprint; the override wins when present. Throws
/// Errc::insufficient_data when no DSM sample falls inside.
double height_from_dsm(const Footprint& f, const MergedTerrain& dsm, const MergedTerrain& dtm);

/// LoD1 prism with a flat roof: bottom ring at z = 0, top ring at z = height,
/// anchored at the footprint centroid. Holes become inner walls. Throws
/// Errc::geometry for degenerate polygons, Errc::range for height <= 0.
BuildingModel extrude_flat(const Footprint& f, double height, double ground_elevation);

/// Greedy sequential plane extraction: repeatedly takes the random-consensus
/// plane with the most inliers, refits it by least squares, and removes its
/// inliers until fewer than `min_support` samples would support a plane.
/// Deterministic for a given seed. Below `min_support` samples it returns a
/// single horizontal fallback plane at the mean height.
std::vector<RoofPlane> fit_roof_planes(std::span<const Vec3> samples, double inlier_tol, std::size_t min_support,
                                       std::uint64_t seed = 0x5eed);

/// DSM samples inside a footprint in the local frame of `anchor` (x east, y
/// north, z = elevation).
std::vector<Vec3> dsm_samples_in(const Footprint& f, const MergedTerrain& dsm, const GeoPoint& anchor);

struct BuildFailure {
  std::string footprint_id;
  std::string reason;
};

struct Tileset {
  std::map<TileId, std::vector<BuildingModel>> tiles;  // buildings sorted by id
  std::vector<BuildFailure> failures;

  std::size_t building_count() const;
};

struct BuildOptions {
  int zoom = kBuildingZoom;
  double default_height_m = 10.0;  ///< used when neither override nor DSM is available
  double roof_inlier_tol_m = 0.15;
  std::size_t roof_min_support = 12;
};

/// Builds every footprint independently (in parallel) and groups the models
/// by the tile of their centroid. Failing footprints are reported and
/// skipped. Output is deterministic.
Tileset build_tileset(std::span<const Footprint> footprints, const MergedTerrain* dsm, const MergedTerrain& dtm,
                      const BuildOptions& options = {});

/// Binary glTF 2.0 container for one model. Positions are float32 in glTF
/// axes (x east, y up, z south) relative to the anchor at base_elevation;
/// anchor and elevations are carried in the node extras.
std::vector<std::uint8_t> encode_glb(const BuildingModel& model);

/// Alternative models per building. Every building implicitly has "lod1".
class VariantRegistry {
 public:
  struct Variant {
    std::string variant_id;
    std::string blob_id;
    Lod lod = Lod::custom;
  };

  void add_building(const std::string& building_id);
  bool has_building(const std::string& building_id) const;
  /// Upsert by (building, variant). Throws Errc::not_found for unknown
  /// buildings and Errc::validation for ids with characters outside
  /// [A-Za-z0-9._-].
  Variant register_variant(const std::string& building_id, const std::string& variant_id,
                           std::vector<std::uint8_t> blob, Lod lod = Lod::custom);
  /// Default first, then registered variants by id.
  std::vector<Variant> list_variants(const std::string& building_id) const;
  const std::vector<std::uint8_t>* blob(const std::string& blob_id) const;
  /// (building id, variant) pairs with their blobs, for persistence.
  std::vector<std::pair<std::string, Variant>> all() const;

  static std::string blob_id_for(const std::string& building_id, const std::string& variant_id);

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::map<std::string, Variant>> variants_;
  std::map<std::string, std::vector<std::uint8_t>> blobs_;
};

}  // namespace citytwin
