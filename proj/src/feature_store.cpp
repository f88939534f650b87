#include "citytwin/feature_store.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <sstream>

#include "citytwin/error.hpp"

namespace citytwin {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Features

GeoPoint Feature::anchor() const {
  switch (geometry.kind) {
    case GeometryKind::point: return geometry.coords.at(0);
    case GeometryKind::polyline: return geometry.coords.at(geometry.coords.size() / 2);
    case GeometryKind::polygon: return footprint_centroid(geometry.as_polygon());
  }
  return {};
}

namespace {

bool in_mercator(const GeoPoint& p) {
  return std::isfinite(p.lon) && std::isfinite(p.lat) && p.lon >= -180 && p.lon <= 180 &&
         std::abs(p.lat) < kMaxLatitude;
}

std::string json_id(const Json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  throw Error(Errc::validation, "id must be a string or integer");
}

}  // namespace

void Feature::validate() const {
  if (id.empty()) throw Error(Errc::validation, "feature id is empty");
  if (category.empty() || category.front() == '/' || category.back() == '/' ||
      category.find("//") != std::string::npos)
    throw Error(Errc::validation, "feature " + id + ": malformed category '" + category + "'");
  const std::size_t need = geometry.kind == GeometryKind::point ? 1 : geometry.kind == GeometryKind::polyline ? 2 : 3;
  if (geometry.coords.size() < need || (geometry.kind == GeometryKind::point && geometry.coords.size() != 1))
    throw Error(Errc::validation, "feature " + id + ": wrong vertex count for its geometry");
  if (geometry.kind != GeometryKind::polygon && !geometry.holes.empty())
    throw Error(Errc::validation, "feature " + id + ": only polygons have holes");
  for (const auto& p : geometry.vertices())
    if (!in_mercator(p)) throw Error(Errc::validation, "feature " + id + ": coordinate outside Web Mercator range");
  if (!attributes.is_object()) throw Error(Errc::validation, "feature " + id + ": attributes must be an object");
}

Json Feature::to_geojson() const {
  Json props = attributes;
  props["category"] = category;
  return {{"type", "Feature"}, {"id", id}, {"geometry", citytwin::to_geojson(geometry)}, {"properties", props}};
}

Feature Feature::from_geojson(const Json& j) {
  if (!j.is_object() || j.value("type", "") != "Feature") throw Error(Errc::validation, "expected a GeoJSON Feature");
  Feature f;
  const Json props = j.contains("properties") && j["properties"].is_object() ? j["properties"] : Json::object();
  if (j.contains("id"))
    f.id = json_id(j["id"]);
  else if (props.contains("id"))
    f.id = json_id(props["id"]);
  if (!props.contains("category") || !props["category"].is_string())
    throw Error(Errc::validation, "feature " + f.id + " lacks a string category");
  f.category = props["category"].get<std::string>();
  if (!j.contains("geometry")) throw Error(Errc::validation, "feature " + f.id + " lacks geometry");
  f.geometry = parse_geometry(j["geometry"]);
  f.attributes = props;
  f.attributes.erase("category");
  f.attributes.erase("id");
  f.validate();
  return f;
}

bool category_matches(std::string_view category, std::string_view filter) {
  if (category == filter) return true;
  return category.size() > filter.size() && category.substr(0, filter.size()) == filter &&
         category[filter.size()] == '/';
}

// ---------------------------------------------------------------------------
// Observations

Json Observation::to_json() const {
  return {{"device", device},
          {"metric", metric},
          {"value", value},
          {"unit", unit},
          {"timestamp", format_rfc3339(timestamp)}};
}

Observation Observation::from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::validation, "observation must be a JSON object");
  auto str = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key)) {
      if (required) throw Error(Errc::validation, std::string("missing '") + key + "'");
      return {};
    }
    if (!j[key].is_string()) throw Error(Errc::validation, std::string("'") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  Observation o;
  o.device = str("device", true);
  o.metric = str("metric", true);
  o.unit = str("unit", false);
  if (!j.contains("value") || !j["value"].is_number()) throw Error(Errc::validation, "'value' must be a number");
  o.value = j["value"].get<double>();
  if (!std::isfinite(o.value)) throw Error(Errc::validation, "'value' must be finite");
  o.timestamp = parse_rfc3339(str("timestamp", true));
  if (o.device.empty() || o.metric.empty()) throw Error(Errc::validation, "device and metric must be non-empty");
  return o;
}

// ---------------------------------------------------------------------------
// Road graph

void RoadGraph::add_node(RoadNode node) {
  if (node.id.empty()) throw Error(Errc::validation, "node id is empty");
  if (!in_mercator(node.position)) throw Error(Errc::validation, "node " + node.id + " outside Web Mercator range");
  nodes_[node.id] = std::move(node);
}

void RoadGraph::add_element(RoadElement e) {
  if (e.id.empty()) throw Error(Errc::validation, "road element id is empty");
  const RoadNode* a = node(e.from);
  const RoadNode* b = node(e.to);
  if (!a || !b) throw Error(Errc::not_found, "road element " + e.id + " references an unknown node");
  if (!(e.maxspeed_kmh > 0) || !std::isfinite(e.maxspeed_kmh))
    throw Error(Errc::validation, "road element " + e.id + ": maxspeed must be positive");
  if (e.lanes < 1) throw Error(Errc::validation, "road element " + e.id + ": lanes must be >= 1");
  if (e.geometry.empty()) e.geometry = {a->position, b->position};
  if (e.geometry.size() < 2) throw Error(Errc::validation, "road element " + e.id + ": geometry needs 2 points");
  for (const auto& p : e.geometry)
    if (!in_mercator(p)) throw Error(Errc::validation, "road element " + e.id + ": coordinate out of range");
  if (!(e.length_m > 0)) {
    e.length_m = 0;
    for (std::size_t i = 1; i < e.geometry.size(); ++i) e.length_m += haversine_m(e.geometry[i - 1], e.geometry[i]);
  }
  if (!(e.length_m > 0) || !std::isfinite(e.length_m))
    throw Error(Errc::validation, "road element " + e.id + ": length must be positive");
  elements_[e.id] = std::move(e);
}

void RoadGraph::add_restriction(Restriction r) {
  if (r.id.empty()) throw Error(Errc::validation, "restriction id is empty");
  for (const auto& id : r.elements)
    if (!element(id)) throw Error(Errc::not_found, "restriction " + r.id + " references unknown element " + id);
  restrictions_[r.id] = std::move(r);
}

const RoadNode* RoadGraph::node(const std::string& id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

const RoadElement* RoadGraph::element(const std::string& id) const {
  auto it = elements_.find(id);
  return it == elements_.end() ? nullptr : &it->second;
}

std::size_t RoadGraph::component_count() const {
  std::map<std::string, std::size_t> index;
  for (const auto& [id, n] : nodes_) index.emplace(id, index.size());
  std::vector<std::size_t> parent(index.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::size_t components = index.size();
  for (const auto& [id, e] : elements_) {
    const auto a = find(index.at(e.from));
    const auto b = find(index.at(e.to));
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components;
}

bool RoadGraph::check_integrity() const {
  for (const auto& [id, e] : elements_)
    if (!node(e.from) || !node(e.to)) return false;
  for (const auto& [id, r] : restrictions_)
    for (const auto& el : r.elements)
      if (!element(el)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Traffic

double arrow_period(double density, const ArrowConfig& config) {
  if (!(density >= 0.0 && density <= 1.0)) {
    spdlog::warn("traffic density {} outside [0, 1]; clamping", density);
    density = std::isnan(density) ? 0.0 : std::clamp(density, 0.0, 1.0);
  }
  return config.p_min_s + density * (config.p_max_s - config.p_min_s);
}

namespace {

bool polyline_touches_box(const std::vector<GeoPoint>& line, const GeoBBox& box) {
  for (const auto& p : line)
    if (box.contains(p)) return true;
  const Vec2 c[4] = {{box.min_lon, box.min_lat}, {box.max_lon, box.min_lat}, {box.max_lon, box.max_lat},
                     {box.min_lon, box.max_lat}};
  for (std::size_t i = 1; i < line.size(); ++i) {
    const Vec2 a{line[i - 1].lon, line[i - 1].lat};
    const Vec2 b{line[i].lon, line[i].lat};
    for (int k = 0; k < 4; ++k)
      if (segments_intersect(a, b, c[k], c[(k + 1) % 4])) return true;
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Heatmaps, colormaps, footprints

std::string to_hex_color(const Rgba& c) {
  auto q = [](double v) { return static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  char buf[10];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x%02x", q(c.r), q(c.g), q(c.b), q(c.a));
  return buf;
}

Json colormap_to_json(const Colormap& cm) {
  Json stops = Json::array();
  for (const auto& s : cm.stops) stops.push_back({{"value", s.value}, {"color", to_hex_color(s.color)}});
  return {{"interpolation", cm.mode == ColormapInterpolation::linear ? "linear" : "nearest"}, {"stops", stops}};
}

Colormap colormap_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("stops") || !j["stops"].is_array())
    throw Error(Errc::config, "colormap needs a stops array");
  Colormap cm;
  const std::string mode = j.value("interpolation", "linear");
  if (mode == "linear")
    cm.mode = ColormapInterpolation::linear;
  else if (mode == "nearest")
    cm.mode = ColormapInterpolation::nearest;
  else
    throw Error(Errc::config, "unknown colormap interpolation '" + mode + "'");
  for (const auto& s : j["stops"]) {
    ColorStop stop;
    if (s.is_array() && s.size() == 2 && s[0].is_number() && s[1].is_string()) {
      stop.value = s[0].get<double>();
      stop.color = parse_hex_color(s[1].get<std::string>());
    } else if (s.is_object() && s.contains("value") && s["value"].is_number() && s.contains("color") &&
               s["color"].is_string()) {
      stop.value = s["value"].get<double>();
      stop.color = parse_hex_color(s["color"].get<std::string>());
    } else {
      throw Error(Errc::config, "colormap stop must be {value, color} or [value, color]");
    }
    cm.stops.push_back(stop);
  }
  cm.validate();
  return cm;
}

void HeatmapDescriptor::validate() const {
  if (name.empty() || !std::all_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_';
      }))
    throw Error(Errc::validation, "heatmap name must match [A-Za-z0-9_-]+");
  if (frame_count < 1) throw Error(Errc::validation, "heatmap " + name + ": frame_count must be >= 1");
  if (animated && frame_count < 2) throw Error(Errc::validation, "heatmap " + name + ": animated needs >= 2 frames");
  if (!animated && frame_count != 1) throw Error(Errc::validation, "heatmap " + name + ": static needs 1 frame");
  if (delay_cs < 0 || delay_cs > 65535) throw Error(Errc::validation, "heatmap " + name + ": delay out of range");
  if (!(opacity >= 0.0 && opacity <= 1.0)) throw Error(Errc::validation, "heatmap " + name + ": opacity outside [0,1]");
  colormap.validate();
}

Json HeatmapDescriptor::to_json() const {
  return {{"name", name},
          {"colormap", colormap_to_json(colormap)},
          {"animated", animated},
          {"frame_count", frame_count},
          {"delay_cs", delay_cs},
          {"opacity", opacity},
          {"coverage", {coverage.min_lon, coverage.min_lat, coverage.max_lon, coverage.max_lat}},
          {"frames", frame_files}};
}

HeatmapDescriptor HeatmapDescriptor::from_json(const Json& j) {
  HeatmapDescriptor d;
  try {
    d.name = j.at("name").get<std::string>();
    d.colormap = colormap_from_json(j.at("colormap"));
    d.animated = j.value("animated", false);
    d.frame_count = j.value("frame_count", 1);
    d.delay_cs = j.value("delay_cs", 50);
    d.opacity = j.value("opacity", 1.0);
    if (j.contains("coverage")) {
      const auto& c = j["coverage"];
      d.coverage = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>(), c.at(3).get<double>()};
    }
    if (j.contains("frames")) d.frame_files = j["frames"].get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw Error(Errc::validation, std::string("heatmap descriptor: ") + e.what());
  }
  return d;
}

Json footprint_to_json(const Footprint& f) {
  Json j = {{"id", f.id}, {"geometry", to_geojson(f.polygon)}};
  if (!f.name.empty()) j["name"] = f.name;
  if (f.height_override) j["height"] = *f.height_override;
  return j;
}

Footprint footprint_from_json(const Json& j) {
  Footprint f;
  try {
    f.id = json_id(j.at("id"));
    auto polys = parse_polygons(j.at("geometry"));
    if (polys.size() != 1) throw Error(Errc::validation, "footprint record must hold one polygon");
    f.polygon = std::move(polys[0]);
    f.name = j.value("name", "");
    if (j.contains("height")) f.height_override = j["height"].get<double>();
  } catch (const Json::exception& e) {
    throw Error(Errc::validation, std::string("footprint record: ") + e.what());
  }
  return f;
}

namespace {

Json node_record(const RoadNode& n) {
  return {{"op", "node"}, {"id", n.id}, {"lon", n.position.lon}, {"lat", n.position.lat}};
}

Json element_record(const RoadElement& e) {
  Json geom = Json::array();
  for (const auto& p : e.geometry) geom.push_back(position_json(p));
  return {{"op", "element"},   {"id", e.id},         {"from", e.from},   {"to", e.to},
          {"geometry", geom},  {"length_m", e.length_m}, {"maxspeed_kmh", e.maxspeed_kmh},
          {"name", e.name},    {"lanes", e.lanes},   {"attributes", e.attributes}};
}

Json restriction_record(const Restriction& r) {
  return {{"op", "restriction"}, {"id", r.id},         {"elements", r.elements},
          {"kind", r.kind},      {"active", r.active}, {"attributes", r.attributes}};
}

Json traffic_record(const TrafficSegment& t) {
  return {{"op", "traffic"},
          {"element", t.element_id},
          {"density", t.density},
          {"timestamp", format_rfc3339(t.timestamp)}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Journal

Journal::Journal(fs::path path) : path_(std::move(path)) {
  const bool fresh = !fs::exists(path_) || fs::file_size(path_) == 0;
  if (!fresh) read(path_);  // validates the header
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(Errc::io, "cannot open journal " + path_.string());
  if (fresh) {
    out_ << Json{{"format", "citytwin-journal"}, {"version", kVersion}}.dump() << '\n';
    out_.flush();
  }
}

void Journal::append(const Json& record) {
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(Errc::io, "journal write failed: " + path_.string());
}

void Journal::flush() { out_.flush(); }

std::vector<Json> Journal::read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<Json> records;
  std::size_t at = 0;
  bool header = true;
  while (at < text.size()) {
    const std::size_t end = text.find('\n', at);
    const bool complete = end != std::string::npos;
    const std::string line = text.substr(at, complete ? end - at : std::string::npos);
    at = complete ? end + 1 : text.size();
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error&) {
      if (!complete) break;  // torn final write
      throw Error(Errc::validation, "corrupt journal line in " + path.string());
    }
    if (header) {
      if (j.value("format", "") != "citytwin-journal") throw Error(Errc::validation, "not a citytwin journal");
      if (j.value("version", 0) != kVersion)
        throw Error(Errc::validation, "unsupported journal version " + std::to_string(j.value("version", 0)));
      header = false;
      continue;
    }
    records.push_back(std::move(j));
  }
  return records;
}

void Journal::rewrite(const fs::path& path, const std::vector<Json>& records) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + tmp.string());
    out << Json{{"format", "citytwin-journal"}, {"version", kVersion}}.dump() << '\n';
    for (const auto& r : records) out << r.dump() << '\n';
    if (!out) throw Error(Errc::io, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Store: persistence

std::unique_ptr<FeatureStore> FeatureStore::open(const fs::path& data_dir) {
  auto store = std::make_unique<FeatureStore>();
  fs::create_directories(data_dir);
  store->data_dir_ = data_dir;
  const fs::path journal_path = data_dir / kJournalName;
  for (const auto& r : Journal::read(journal_path)) store->apply(r);
  store->journal_ = std::make_unique<Journal>(journal_path);
  return store;
}

void FeatureStore::apply(const Json& r) {
  const std::string op = r.value("op", "");
  try {
    if (op == "feature") {
      upsert_feature(Feature::from_geojson(r.at("feature")));
    } else if (op == "observation") {
      ingest_observation(Observation::from_json(r));
    } else if (op == "node") {
      add_node({r.at("id").get<std::string>(), {r.at("lon").get<double>(), r.at("lat").get<double>()}});
    } else if (op == "element") {
      RoadElement e;
      e.id = r.at("id").get<std::string>();
      e.from = r.at("from").get<std::string>();
      e.to = r.at("to").get<std::string>();
      for (const auto& p : r.at("geometry")) e.geometry.push_back(parse_position(p));
      e.length_m = r.value("length_m", 0.0);
      e.maxspeed_kmh = r.value("maxspeed_kmh", 50.0);
      e.name = r.value("name", "");
      e.lanes = r.value("lanes", 1);
      e.attributes = r.value("attributes", Json::object());
      add_element(std::move(e));
    } else if (op == "restriction") {
      Restriction x;
      x.id = r.at("id").get<std::string>();
      x.elements = r.at("elements").get<std::vector<std::string>>();
      x.kind = r.value("kind", "");
      x.active = r.value("active", true);
      x.attributes = r.value("attributes", Json::object());
      add_restriction(std::move(x));
    } else if (op == "traffic") {
      ingest_traffic({r.at("element").get<std::string>(), r.at("density").get<double>(),
                      parse_rfc3339(r.at("timestamp").get<std::string>())});
    } else if (op == "heatmap") {
      auto d = HeatmapDescriptor::from_json(r.at("heatmap"));
      std::vector<ElevationGrid> frames;
      if (data_dir_)
        for (const auto& f : d.frame_files) frames.push_back(read_grid(*data_dir_ / f));
      register_heatmap(std::move(d), std::move(frames));
    } else if (op == "footprint") {
      upsert_footprint(footprint_from_json(r));
    } else if (op == "raster") {
      RasterRef ref{r.at("role").get<std::string>(), r.at("file").get<std::string>()};
      if (!data_dir_) throw Error(Errc::io, "raster records need a data directory");
      add_raster(ref, read_grid(*data_dir_ / ref.file));
    } else if (op == "variant") {
      add_variant({r.at("building").get<std::string>(), r.at("variant").get<std::string>(),
                   lod_from_string(r.at("lod").get<std::string>()), r.at("file").get<std::string>()});
    } else if (op == "entity_model") {
      add_entity_model({r.at("id").get<std::string>(), r.value("name", ""), r.at("file").get<std::string>()});
    } else {
      throw Error(Errc::validation, "unknown journal op '" + op + "'");
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::validation, "journal record '" + op + "': " + e.what());
  }
}

void FeatureStore::write(const Json& record) {
  if (journal_) journal_->append(record);
}

std::vector<Json> FeatureStore::snapshot_records() const {
  std::shared_lock lock(mutex_);
  std::vector<Json> out;
  for (const auto& [id, f] : features_) out.push_back({{"op", "feature"}, {"feature", f.to_geojson()}});
  for (const auto& [id, f] : footprints_) {
    Json j = footprint_to_json(f);
    j["op"] = "footprint";
    out.push_back(std::move(j));
  }
  for (const auto& [id, n] : roads_->nodes()) out.push_back(node_record(n));
  for (const auto& [id, e] : roads_->elements()) out.push_back(element_record(e));
  for (const auto& [id, r] : roads_->restrictions()) out.push_back(restriction_record(r));
  for (const auto& [r, g] : rasters_) out.push_back({{"op", "raster"}, {"role", r.role}, {"file", r.file}});
  for (const auto& [name, h] : heatmaps_) out.push_back({{"op", "heatmap"}, {"heatmap", h->descriptor.to_json()}});
  for (const auto& [id, m] : entity_models_)
    out.push_back({{"op", "entity_model"}, {"id", m.id}, {"name", m.name}, {"file", m.file}});
  for (const auto& [key, v] : variants_)
    out.push_back({{"op", "variant"},
                   {"building", v.building_id},
                   {"variant", v.variant_id},
                   {"lod", to_string(v.lod)},
                   {"file", v.file}});
  for (const auto& [key, series] : observations_)
    for (const auto& [t, o] : series) {
      Json j = o.to_json();
      j["op"] = "observation";
      out.push_back(std::move(j));
    }
  for (const auto& [id, t] : traffic_) out.push_back(traffic_record(t));
  return out;
}

void FeatureStore::compact() {
  if (!journal_) return;
  const auto records = snapshot_records();
  std::unique_lock lock(mutex_);
  const fs::path path = journal_->path();
  journal_.reset();
  Journal::rewrite(path, records);
  journal_ = std::make_unique<Journal>(path);
}

// ---------------------------------------------------------------------------
// Store: features

void FeatureStore::index_feature(const Feature& f) {
  for (const auto& p : f.geometry.vertices()) buckets_[tile_for_point(p, kBuildingZoom)].insert(f.id);
}

void FeatureStore::unindex_feature(const Feature& f) {
  for (const auto& p : f.geometry.vertices()) {
    auto it = buckets_.find(tile_for_point(p, kBuildingZoom));
    if (it == buckets_.end()) continue;
    it->second.erase(f.id);
    if (it->second.empty()) buckets_.erase(it);
  }
}

void FeatureStore::upsert_feature(Feature f) {
  f.validate();
  const Json record = {{"op", "feature"}, {"feature", f.to_geojson()}};
  std::unique_lock lock(mutex_);
  auto it = features_.find(f.id);
  if (it != features_.end()) unindex_feature(it->second);
  index_feature(f);
  features_[f.id] = std::move(f);
  write(record);
}

Feature FeatureStore::get_feature(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = features_.find(id);
  if (it == features_.end()) throw Error(Errc::not_found, "unknown feature " + id);
  return it->second;
}

bool FeatureStore::has_feature(const std::string& id) const {
  std::shared_lock lock(mutex_);
  return features_.count(id) != 0;
}

std::size_t FeatureStore::feature_count() const {
  std::shared_lock lock(mutex_);
  return features_.size();
}

std::vector<Feature> FeatureStore::query_bbox(const GeoBBox& box, std::span<const std::string> categories,
                                              std::optional<std::size_t> limit) const {
  if (!box.valid()) throw Error(Errc::validation, "invalid bounding box");
  std::shared_lock lock(mutex_);
  std::vector<Feature> out;
  if (features_.empty() || (limit && *limit == 0)) return out;

  const double lat_cap = std::nextafter(kMaxLatitude, 0.0);
  auto corner = [&](double lon, double lat) {
    return tile_for_point({std::clamp(lon, -180.0, 180.0), std::clamp(lat, -lat_cap, lat_cap)}, kBuildingZoom);
  };
  const TileId nw = corner(box.min_lon, box.max_lat);
  const TileId se = corner(box.max_lon, box.min_lat);
  const std::uint64_t span_tiles = std::uint64_t(se.x - nw.x + 1) * std::uint64_t(se.y - nw.y + 1);

  std::set<std::string> candidates;
  if (span_tiles <= buckets_.size()) {
    for (std::uint32_t y = nw.y; y <= se.y; ++y)
      for (std::uint32_t x = nw.x; x <= se.x; ++x) {
        auto it = buckets_.find({kBuildingZoom, x, y});
        if (it != buckets_.end()) candidates.insert(it->second.begin(), it->second.end());
      }
  } else {
    for (const auto& [tile, ids] : buckets_)
      if (tile.x >= nw.x && tile.x <= se.x && tile.y >= nw.y && tile.y <= se.y)
        candidates.insert(ids.begin(), ids.end());
  }

  for (const auto& id : candidates) {
    const Feature& f = features_.at(id);
    if (!categories.empty() &&
        std::none_of(categories.begin(), categories.end(),
                     [&](const std::string& c) { return category_matches(f.category, c); }))
      continue;
    const auto verts = f.geometry.vertices();
    if (std::none_of(verts.begin(), verts.end(), [&](const GeoPoint& p) { return box.contains(p); })) continue;
    out.push_back(f);
    if (limit && out.size() >= *limit) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Store: observations

void FeatureStore::ingest_observation(Observation o) {
  if (o.device.empty() || o.metric.empty()) throw Error(Errc::validation, "device and metric must be non-empty");
  if (!std::isfinite(o.value)) throw Error(Errc::validation, "observation value must be finite");
  Json record = o.to_json();
  record["op"] = "observation";
  std::unique_lock lock(mutex_);
  if (!features_.count(o.device)) throw Error(Errc::not_found, "unknown device " + o.device);
  observations_[{o.device, o.metric}][o.timestamp] = o;
  write(record);
}

std::vector<Observation> FeatureStore::time_series(const std::string& device, const std::string& metric,
                                                   TimestampMs from, TimestampMs to) const {
  std::shared_lock lock(mutex_);
  if (!features_.count(device)) throw Error(Errc::not_found, "unknown device " + device);
  std::vector<Observation> out;
  auto it = observations_.find({device, metric});
  if (it == observations_.end() || from > to) return out;
  for (auto o = it->second.lower_bound(from); o != it->second.end() && o->first <= to; ++o) out.push_back(o->second);
  return out;
}

std::optional<Observation> FeatureStore::last_value(const std::string& device, const std::string& metric) const {
  std::shared_lock lock(mutex_);
  if (!features_.count(device)) throw Error(Errc::not_found, "unknown device " + device);
  auto it = observations_.find({device, metric});
  if (it == observations_.end() || it->second.empty()) return std::nullopt;
  return it->second.rbegin()->second;
}

std::vector<std::string> FeatureStore::metrics_of(const std::string& device) const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (auto it = observations_.lower_bound({device, ""}); it != observations_.end() && it->first.first == device; ++it)
    out.push_back(it->first.second);
  return out;
}

// ---------------------------------------------------------------------------
// Store: roads and traffic

void FeatureStore::add_node(RoadNode node) {
  std::unique_lock lock(mutex_);
  auto next = std::make_shared<RoadGraph>(*roads_);
  next->add_node(node);
  write(node_record(*next->node(node.id)));
  roads_ = std::move(next);
}

void FeatureStore::add_element(RoadElement element) {
  std::unique_lock lock(mutex_);
  auto next = std::make_shared<RoadGraph>(*roads_);
  const std::string id = element.id;
  next->add_element(std::move(element));
  write(element_record(*next->element(id)));
  roads_ = std::move(next);
}

void FeatureStore::add_restriction(Restriction restriction) {
  std::unique_lock lock(mutex_);
  auto next = std::make_shared<RoadGraph>(*roads_);
  const Json record = restriction_record(restriction);
  next->add_restriction(std::move(restriction));
  write(record);
  roads_ = std::move(next);
}

std::shared_ptr<const RoadGraph> FeatureStore::road_graph() const {
  std::shared_lock lock(mutex_);
  return roads_;
}

void FeatureStore::ingest_traffic(TrafficSegment t) {
  if (!(t.density >= 0.0 && t.density <= 1.0))
    throw Error(Errc::validation, "traffic density must lie in [0, 1]");
  std::unique_lock lock(mutex_);
  if (!roads_->element(t.element_id)) throw Error(Errc::not_found, "unknown road element " + t.element_id);
  auto it = traffic_.find(t.element_id);
  if (it == traffic_.end() || it->second.timestamp <= t.timestamp) traffic_[t.element_id] = t;
  write(traffic_record(t));
}

std::vector<TrafficView> FeatureStore::traffic_in_bbox(const GeoBBox& box, const ArrowConfig& config) const {
  if (!box.valid()) throw Error(Errc::validation, "invalid bounding box");
  std::shared_lock lock(mutex_);
  std::vector<TrafficView> out;
  for (const auto& [id, t] : traffic_) {
    const RoadElement* e = roads_->element(id);
    if (!e || !polyline_touches_box(e->geometry, box)) continue;
    out.push_back({t, e->geometry, arrow_period(t.density, config)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Store: heatmaps and city inputs

void FeatureStore::register_heatmap(HeatmapDescriptor d, std::vector<ElevationGrid> frames) {
  if (!frames.empty()) {
    if (static_cast<int>(frames.size()) != d.frame_count)
      throw Error(Errc::validation, "heatmap " + d.name + ": frame_count does not match supplied frames");
    for (const auto& f : frames) f.validate();
    if (!d.coverage.valid() || d.coverage == GeoBBox{}) d.coverage = frames[0].bbox();
  }
  d.validate();
  const Json record = {{"op", "heatmap"}, {"heatmap", d.to_json()}};
  auto layer = std::make_shared<HeatmapLayer>(HeatmapLayer{std::move(d), std::move(frames)});
  std::unique_lock lock(mutex_);
  heatmaps_[layer->descriptor.name] = std::move(layer);
  write(record);
}

std::shared_ptr<const HeatmapLayer> FeatureStore::heatmap(const std::string& name) const {
  std::shared_lock lock(mutex_);
  auto it = heatmaps_.find(name);
  if (it == heatmaps_.end()) throw Error(Errc::not_found, "unknown heatmap " + name);
  return it->second;
}

std::vector<std::string> FeatureStore::heatmap_names() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, h] : heatmaps_) out.push_back(name);
  return out;
}

void FeatureStore::upsert_footprint(Footprint f) {
  if (f.id.empty()) throw Error(Errc::validation, "footprint id is empty");
  if (f.polygon.outer.size() < 3) throw Error(Errc::validation, "footprint " + f.id + " needs 3 vertices");
  Json record = footprint_to_json(f);
  record["op"] = "footprint";
  std::unique_lock lock(mutex_);
  footprints_[f.id] = std::move(f);
  write(record);
}

std::vector<Footprint> FeatureStore::footprints() const {
  std::shared_lock lock(mutex_);
  std::vector<Footprint> out;
  for (const auto& [id, f] : footprints_) out.push_back(f);
  return out;
}

std::size_t FeatureStore::footprint_count() const {
  std::shared_lock lock(mutex_);
  return footprints_.size();
}

void FeatureStore::add_raster(RasterRef ref, ElevationGrid grid) {
  if (ref.role != "dtm" && ref.role != "dsm") throw Error(Errc::validation, "raster role must be dtm or dsm");
  grid.validate();
  const Json record = {{"op", "raster"}, {"role", ref.role}, {"file", ref.file}};
  auto shared = std::make_shared<const ElevationGrid>(std::move(grid));
  std::unique_lock lock(mutex_);
  auto it = std::find_if(rasters_.begin(), rasters_.end(), [&](const auto& r) { return r.first.file == ref.file; });
  if (it != rasters_.end())
    *it = {std::move(ref), std::move(shared)};
  else
    rasters_.emplace_back(std::move(ref), std::move(shared));
  auto dtm = std::make_shared<MergedTerrain>();
  auto dsm = std::make_shared<MergedTerrain>();
  for (const auto& [r, g] : rasters_) (r.role == "dtm" ? dtm : dsm)->add(*g);
  dtm_ = std::move(dtm);
  dsm_ = std::move(dsm);
  write(record);
}

std::shared_ptr<const MergedTerrain> FeatureStore::dtm() const {
  std::shared_lock lock(mutex_);
  return dtm_;
}

std::shared_ptr<const MergedTerrain> FeatureStore::dsm() const {
  std::shared_lock lock(mutex_);
  return dsm_;
}

std::vector<RasterRef> FeatureStore::rasters() const {
  std::shared_lock lock(mutex_);
  std::vector<RasterRef> out;
  for (const auto& [r, g] : rasters_) out.push_back(r);
  return out;
}

void FeatureStore::add_variant(VariantRecord v) {
  const Json record = {{"op", "variant"},
                       {"building", v.building_id},
                       {"variant", v.variant_id},
                       {"lod", to_string(v.lod)},
                       {"file", v.file}};
  std::unique_lock lock(mutex_);
  variants_[{v.building_id, v.variant_id}] = std::move(v);
  write(record);
}

std::vector<VariantRecord> FeatureStore::variants() const {
  std::shared_lock lock(mutex_);
  std::vector<VariantRecord> out;
  for (const auto& [k, v] : variants_) out.push_back(v);
  return out;
}

void FeatureStore::add_entity_model(EntityModel m) {
  if (m.id.empty()) throw Error(Errc::validation, "entity model id is empty");
  const Json record = {{"op", "entity_model"}, {"id", m.id}, {"name", m.name}, {"file", m.file}};
  std::unique_lock lock(mutex_);
  entity_models_[m.id] = std::move(m);
  write(record);
}

std::vector<EntityModel> FeatureStore::entity_models() const {
  std::shared_lock lock(mutex_);
  std::vector<EntityModel> out;
  for (const auto& [id, m] : entity_models_) out.push_back(m);
  return out;
}

}  // namespace citytwin
