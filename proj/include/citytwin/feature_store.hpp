#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "citytwin/city_builder.hpp"
#include "citytwin/compositor.hpp"
#include "citytwin/geojson.hpp"
#include "citytwin/terrain.hpp"
#include "citytwin/tile_pyramid.hpp"
#include "citytwin/timeutil.hpp"

namespace citytwin {

// ---------------------------------------------------------------------------
// Records

struct Feature {
  std::string id;
  std::string category;  ///< "Service/SubCategory"
  Geometry geometry;
  Json attributes = Json::object();

  /// Point itself, middle vertex of a polyline, area centroid of a polygon.
  GeoPoint anchor() const;
  /// Throws Errc::validation.
  void validate() const;

  Json to_geojson() const;
  static Feature from_geojson(const Json& j);
};

/// "A" matches "A" and "A/B"; "A/B" matches only "A/B".
bool category_matches(std::string_view category, std::string_view filter);

struct Observation {
  std::string device;
  std::string metric;
  double value = 0.0;
  std::string unit;
  TimestampMs timestamp = 0;

  Json to_json() const;
  /// Throws Errc::validation.
  static Observation from_json(const Json& j);
};

struct RoadNode {
  std::string id;
  GeoPoint position;
};

/// Directed routable edge. Two-way roads are two elements.
struct RoadElement {
  std::string id;
  std::string from;
  std::string to;
  std::vector<GeoPoint> geometry;  ///< from-node first, to-node last
  double length_m = 0.0;
  double maxspeed_kmh = 50.0;
  std::string name;
  int lanes = 1;
  Json attributes = Json::object();

  double travel_time_s() const { return length_m / (maxspeed_kmh / 3.6); }
};

struct Restriction {
  std::string id;
  std::vector<std::string> elements;
  std::string kind;
  bool active = true;
  Json attributes = Json::object();
};

class RoadGraph {
 public:
  /// Upsert. Throws Errc::validation.
  void add_node(RoadNode node);
  /// Upsert. Endpoints must exist. Missing geometry becomes the straight
  /// segment between the nodes; a non-positive length is measured from the
  /// geometry. Throws Errc::validation / Errc::not_found.
  void add_element(RoadElement element);
  /// Throws Errc::not_found for unknown elements.
  void add_restriction(Restriction restriction);

  const RoadNode* node(const std::string& id) const;
  const RoadElement* element(const std::string& id) const;
  const std::map<std::string, RoadNode>& nodes() const { return nodes_; }
  const std::map<std::string, RoadElement>& elements() const { return elements_; }
  const std::map<std::string, Restriction>& restrictions() const { return restrictions_; }

  /// Weakly connected components over all nodes.
  std::size_t component_count() const;
  /// Every element endpoint names an existing node.
  bool check_integrity() const;

 private:
  std::map<std::string, RoadNode> nodes_;
  std::map<std::string, RoadElement> elements_;
  std::map<std::string, Restriction> restrictions_;
};

struct TrafficSegment {
  std::string element_id;
  double density = 0.0;  ///< [0, 1]
  TimestampMs timestamp = 0;
};

struct ArrowConfig {
  double p_min_s = 1.0;
  double p_max_s = 10.0;
};

/// Seconds for an arrow to traverse a segment; out-of-range densities are
/// clamped to [0, 1] with a warning.
double arrow_period(double density, const ArrowConfig& config = {});

struct TrafficView {
  TrafficSegment segment;
  std::vector<GeoPoint> geometry;
  double arrow_period_s = 0.0;
};

struct HeatmapDescriptor {
  std::string name;
  Colormap colormap;
  bool animated = false;
  int frame_count = 1;
  int delay_cs = 50;  ///< per frame, animated only
  double opacity = 1.0;
  GeoBBox coverage;
  std::vector<std::string> frame_files;  ///< relative to the data directory

  /// Throws Errc::validation / Errc::config.
  void validate() const;
  Json to_json() const;
  static HeatmapDescriptor from_json(const Json& j);
};

struct HeatmapLayer {
  HeatmapDescriptor descriptor;
  std::vector<ElevationGrid> frames;  ///< scalar rasters; nodata -> transparent
};

struct RasterRef {
  std::string role;  ///< "dtm" or "dsm"
  std::string file;
};

struct VariantRecord {
  std::string building_id;
  std::string variant_id;
  Lod lod = Lod::custom;
  std::string file;
};

struct EntityModel {
  std::string id;
  std::string name;
  std::string file;
};

Json colormap_to_json(const Colormap& cm);
Colormap colormap_from_json(const Json& j);
std::string to_hex_color(const Rgba& c);

Json footprint_to_json(const Footprint& f);
Footprint footprint_from_json(const Json& j);

// ---------------------------------------------------------------------------
// Journal

/// Append-only NDJSON log. The first line is a header
/// {"format":"citytwin-journal","version":1}; every other line is one record
/// with an "op" member.
class Journal {
 public:
  static constexpr int kVersion = 1;

  explicit Journal(std::filesystem::path path);
  void append(const Json& record);
  void flush();
  const std::filesystem::path& path() const { return path_; }

  /// Records in file order. A truncated final line (crash mid-write) is
  /// ignored. Throws Errc::validation for a bad header or version.
  static std::vector<Json> read(const std::filesystem::path& path);
  /// Atomically replaces the journal with the given records.
  static void rewrite(const std::filesystem::path& path, const std::vector<Json>& records);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Store

/// In-memory knowledge base with an optional journal. Readers share a lock,
/// each mutation is applied and journaled under an exclusive lock, so a query
/// never observes half a record.
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(const FeatureStore&) = delete;
  FeatureStore& operator=(const FeatureStore&) = delete;

  /// Replays `data_dir/journal.ndjson` (if present), loads referenced raster
  /// files and keeps appending new records to the same journal.
  static std::unique_ptr<FeatureStore> open(const std::filesystem::path& data_dir);
  static constexpr const char* kJournalName = "journal.ndjson";

  const std::optional<std::filesystem::path>& data_dir() const { return data_dir_; }
  /// Rewrites the journal as the canonical dump of the current state.
  void compact();
  /// Canonical dump: every live record, sorted per kind.
  std::vector<Json> snapshot_records() const;

  // Features
  void upsert_feature(Feature f);
  Feature get_feature(const std::string& id) const;
  bool has_feature(const std::string& id) const;
  std::size_t feature_count() const;
  std::vector<Feature> query_bbox(const GeoBBox& box, std::span<const std::string> categories = {},
                                  std::optional<std::size_t> limit = std::nullopt) const;

  // Observations
  void ingest_observation(Observation o);
  std::vector<Observation> time_series(const std::string& device, const std::string& metric,
                                       TimestampMs from = kMinTimestamp, TimestampMs to = kMaxTimestamp) const;
  std::optional<Observation> last_value(const std::string& device, const std::string& metric) const;
  std::vector<std::string> metrics_of(const std::string& device) const;

  // Roads and traffic
  void add_node(RoadNode node);
  void add_element(RoadElement element);
  void add_restriction(Restriction restriction);
  std::shared_ptr<const RoadGraph> road_graph() const;
  void ingest_traffic(TrafficSegment t);
  std::vector<TrafficView> traffic_in_bbox(const GeoBBox& box, const ArrowConfig& config = {}) const;

  // Heatmaps
  void register_heatmap(HeatmapDescriptor d, std::vector<ElevationGrid> frames);
  std::shared_ptr<const HeatmapLayer> heatmap(const std::string& name) const;
  std::vector<std::string> heatmap_names() const;

  // City inputs
  void upsert_footprint(Footprint f);
  std::vector<Footprint> footprints() const;
  std::size_t footprint_count() const;
  /// Re-adding a file that is already registered replaces its grid in place.
  void add_raster(RasterRef ref, ElevationGrid grid);
  std::shared_ptr<const MergedTerrain> dtm() const;
  std::shared_ptr<const MergedTerrain> dsm() const;
  std::vector<RasterRef> rasters() const;
  void add_variant(VariantRecord v);
  std::vector<VariantRecord> variants() const;
  void add_entity_model(EntityModel m);
  std::vector<EntityModel> entity_models() const;

 private:
  void apply(const Json& record);
  void write(const Json& record);
  void index_feature(const Feature& f);
  void unindex_feature(const Feature& f);

  mutable std::shared_mutex mutex_;
  std::optional<std::filesystem::path> data_dir_;
  std::unique_ptr<Journal> journal_;

  std::map<std::string, Feature> features_;
  std::unordered_map<TileId, std::set<std::string>, TileIdHash> buckets_;
  std::map<std::pair<std::string, std::string>, std::map<TimestampMs, Observation>> observations_;
  std::shared_ptr<const RoadGraph> roads_ = std::make_shared<RoadGraph>();
  std::map<std::string, TrafficSegment> traffic_;
  std::map<std::string, std::shared_ptr<const HeatmapLayer>> heatmaps_;
  std::map<std::string, Footprint> footprints_;
  std::vector<std::pair<RasterRef, std::shared_ptr<const ElevationGrid>>> rasters_;
  std::shared_ptr<const MergedTerrain> dtm_ = std::make_shared<MergedTerrain>();
  std::shared_ptr<const MergedTerrain> dsm_ = std::make_shared<MergedTerrain>();
  std::map<std::pair<std::string, std::string>, VariantRecord> variants_;
  std::map<std::string, EntityModel> entity_models_;
};

}  // namespace citytwin
