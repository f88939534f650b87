#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "citytwin/city_builder.hpp"
#include "citytwin/geojson.hpp"

namespace citytwin {

struct SkippedRecord {
  std::string record;  ///< id or 1-based line/feature index
  std::string reason;
};

struct FileReport {
  std::string kind;
  std::string path;
  std::size_t accepted = 0;
  std::vector<SkippedRecord> skipped;
  std::string error;  ///< non-empty when the whole file failed

  bool failed() const { return !error.empty(); }
  Json to_json() const;
};

struct IngestReport {
  std::vector<FileReport> files;

  /// 0 when everything was accepted, 1 when some records were skipped, 2 when
  /// a file failed as a whole.
  int exit_code() const;
  Json to_json() const;
};

/// Reads a manifest {"datasets": [{"kind", "path", ...}]} with paths relative
/// to the manifest, copies raster and model payloads into `data_dir` and
/// journals every accepted record. Kinds: footprints, dtm, dsm, features,
/// roads, heatmap, traffic, entity-catalog, entity-instances. Vector data may
/// declare "crs" (EPSG:4326 or EPSG:3003); rasters must be EPSG:4326.
/// Throws Errc::validation / Errc::io for an unreadable manifest.
IngestReport ingest_manifest(const std::filesystem::path& manifest, const std::filesystem::path& data_dir);

/// Rewrites every "coordinates" array of a GeoJSON object from `crs` to WGS84.
void reproject_geojson(Json& j, const std::string& crs);

/// "~XX" escapes for everything outside [A-Za-z0-9._-], so any id maps to a
/// distinct file name.
std::string file_safe_id(const std::string& id);

struct BuildReport {
  std::size_t buildings = 0;
  std::size_t tiles = 0;
  std::vector<BuildFailure> failures;

  Json to_json() const;
};

/// GeoJSON summary of a built model: the footprint plus anchor, elevations,
/// height and roof-plane count.
Json building_summary(const BuildingModel& model, const Footprint& footprint);

/// Replaces `data_dir`/buildings with a fresh z18 tileset built from the
/// stored footprints and rasters: per tile an index.json and one GLB per
/// building, plus buildings/build_report.json.
BuildReport build_tiles(const std::filesystem::path& data_dir, const BuildOptions& options = {});

}  // namespace citytwin
