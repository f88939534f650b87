#include "citytwin/ingest.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <regex>
#include <sstream>

#include "citytwin/crs.hpp"
#include "citytwin/error.hpp"
#include "citytwin/feature_store.hpp"
#include "citytwin/timeutil.hpp"

namespace citytwin {

namespace fs = std::filesystem;

Json FileReport::to_json() const {
  Json skips = Json::array();
  for (const auto& s : skipped) skips.push_back({{"record", s.record}, {"reason", s.reason}});
  Json j = {{"kind", kind}, {"path", path}, {"accepted", accepted}, {"skipped", skips}};
  if (failed()) j["error"] = error;
  return j;
}

int IngestReport::exit_code() const {
  int code = 0;
  for (const auto& f : files) {
    if (f.failed()) return 2;
    if (!f.skipped.empty()) code = 1;
  }
  return code;
}

Json IngestReport::to_json() const {
  Json list = Json::array();
  for (const auto& f : files) list.push_back(f.to_json());
  return {{"files", list}, {"exit_code", exit_code()}};
}

Json BuildReport::to_json() const {
  Json list = Json::array();
  for (const auto& f : failures) list.push_back({{"footprint", f.footprint_id}, {"reason", f.reason}});
  return {{"buildings", buildings}, {"tiles", tiles}, {"failures", list}};
}

std::string file_safe_id(const std::string& id) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : id) {
    if (std::isalnum(c) || c == '.' || c == '_' || c == '-') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('~');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  if (out.empty() || out == "." || out == "..") out = "~" + out;
  return out;
}

void reproject_geojson(Json& j, const std::string& crs) {
  if (crs == "EPSG:4326") return;
  if (!is_supported_crs(crs)) throw Error(Errc::config, "unsupported CRS " + crs);
  auto convert = [&](auto&& self, Json& c) -> void {
    if (c.is_array() && c.size() >= 2 && c[0].is_number()) {
      const GeoPoint p = to_wgs84(crs, c[0].get<double>(), c[1].get<double>());
      c[0] = p.lon;
      c[1] = p.lat;
    } else if (c.is_array()) {
      for (auto& e : c) self(self, e);
    }
  };
  if (j.is_array()) {
    for (auto& e : j) reproject_geojson(e, crs);
    return;
  }
  if (!j.is_object()) return;
  for (auto& [key, value] : j.items()) {
    if (key == "coordinates")
      convert(convert, value);
    else if (key != "properties")
      reproject_geojson(value, crs);
  }
}

namespace {

struct Dataset {
  std::string kind;
  Json entry;
  fs::path base;  // manifest directory
  std::size_t index = 0;

  fs::path resolve(const std::string& p) const { return fs::path(p).is_absolute() ? fs::path(p) : base / p; }
  fs::path path() const { return resolve(entry.at("path").get<std::string>()); }
  std::string crs() const { return entry.value("crs", "EPSG:4326"); }
};

const Json& features_of(const Json& fc) {
  if (fc.value("type", "") != "FeatureCollection") throw Error(Errc::validation, "expected a FeatureCollection");
  return fc.at("features");
}

Json read_geojson(const Dataset& d) {
  Json j = read_json_file(d.path().string());
  reproject_geojson(j, d.crs());
  return j;
}

std::string record_label(const Json& f, std::size_t k) {
  if (f.contains("id") && (f["id"].is_string() || f["id"].is_number()))
    return f["id"].is_string() ? f["id"].get<std::string>() : f["id"].dump();
  if (f.contains("properties") && f["properties"].is_object() && f["properties"].contains("id"))
    return f["properties"]["id"].is_string() ? f["properties"]["id"].get<std::string>() : f["properties"]["id"].dump();
  return "#" + std::to_string(k + 1);
}

template <typename Fn>
void each_record(FileReport& report, const std::string& label, Fn&& fn) {
  try {
    fn();
    ++report.accepted;
  } catch (const Error& e) {
    report.skipped.push_back({label, std::string(to_string(e.code())) + ": " + e.what()});
  } catch (const Json::exception& e) {
    report.skipped.push_back({label, std::string("validation: ") + e.what()});
  }
}

template <typename Fn>
void each_line(const fs::path& path, FileReport& report, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read " + path.string());
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    each_record(report, "line " + std::to_string(n), [&] { fn(Json::parse(line)); });
  }
}

void copy_into(const fs::path& from, const fs::path& to) {
  fs::create_directories(to.parent_path());
  fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

std::string rel(const fs::path& p) { return p.generic_string(); }

// ---------------------------------------------------------------------------

void ingest_footprints(const Dataset& d, FeatureStore& store, FileReport& report) {
  const Json fc = read_geojson(d);
  const Json& list = features_of(fc);
  for (std::size_t k = 0; k < list.size(); ++k) {
    const Json& f = list[k];
    const std::string label = record_label(f, k);
    std::vector<Footprint> parts;
    each_record(report, label, [&] {
      const Json props = f.contains("properties") && f["properties"].is_object() ? f["properties"] : Json::object();
      if (label.starts_with("#")) throw Error(Errc::validation, "footprint has no id");
      auto polygons = parse_polygons(f.at("geometry"));
      if (polygons.empty()) throw Error(Errc::validation, "empty footprint geometry");
      std::optional<double> height;
      if (props.contains("height") && !props["height"].is_null()) {
        height = props["height"].get<double>();
        if (!(*height > 0)) throw Error(Errc::validation, "height must be positive");
      }
      for (std::size_t p = 0; p < polygons.size(); ++p) {
        Footprint fp{polygons.size() == 1 ? label : label + "-" + std::to_string(p + 1), std::move(polygons[p]),
                     props.value("name", ""), height};
        extrude_flat(fp, height.value_or(10.0), 0.0);  // rejects degenerate rings
        parts.push_back(std::move(fp));
      }
      for (auto& fp : parts) store.upsert_footprint(std::move(fp));
    });
  }

  if (!d.entry.contains("variants")) return;
  const fs::path models = *store.data_dir() / "models";
  for (const auto& v : d.entry["variants"]) {
    const std::string label = v.value("building", "?") + "." + v.value("variant", "?");
    each_record(report, label, [&] {
      VariantRecord r{v.at("building").get<std::string>(), v.at("variant").get<std::string>(),
                      lod_from_string(v.value("lod", "custom")), ""};
      static const std::regex ok("[A-Za-z0-9._-]+");
      if (!std::regex_match(r.variant_id, ok)) throw Error(Errc::validation, "variant id has invalid characters");
      if (r.variant_id == "lod1") throw Error(Errc::validation, "variant id lod1 is reserved");
      const auto fps = store.footprints();
      if (std::none_of(fps.begin(), fps.end(), [&](const Footprint& f) { return f.id == r.building_id; }))
        throw Error(Errc::not_found, "no footprint " + r.building_id);
      const fs::path src = d.resolve(v.at("path").get<std::string>());
      if (!fs::is_regular_file(src)) throw Error(Errc::io, "missing model file " + src.string());
      const std::string name = file_safe_id(r.building_id) + "." + r.variant_id + ".glb";
      copy_into(src, models / name);
      r.file = rel(fs::path("models") / name);
      store.add_variant(std::move(r));
    });
  }
}

void ingest_raster(const Dataset& d, FeatureStore& store, FileReport& report) {
  if (d.crs() != "EPSG:4326") throw Error(Errc::config, "rasters must be in EPSG:4326, got " + d.crs());
  ElevationGrid grid = read_grid(d.path());
  grid.priority = d.entry.value("priority", grid.priority);
  grid.validate();
  const std::string name = d.kind + "-" + std::to_string(d.index) + ".grid";
  const fs::path dst = *store.data_dir() / "rasters" / name;
  fs::create_directories(dst.parent_path());
  write_binary_grid(dst, grid);
  store.add_raster({d.kind, rel(fs::path("rasters") / name)}, std::move(grid));
  report.accepted = 1;
}

void ingest_features(const Dataset& d, FeatureStore& store, FileReport& report) {
  const Json fc = read_geojson(d);
  const Json& list = features_of(fc);
  for (std::size_t k = 0; k < list.size(); ++k)
    each_record(report, record_label(list[k], k), [&] { store.upsert_feature(Feature::from_geojson(list[k])); });
  if (d.entry.contains("observations"))
    each_line(d.resolve(d.entry["observations"].get<std::string>()), report,
              [&](const Json& j) { store.ingest_observation(Observation::from_json(j)); });
}

void ingest_roads(const Dataset& d, FeatureStore& store, FileReport& report) {
  const Json fc = read_geojson(d);
  const Json& list = features_of(fc);
  auto props_of = [](const Json& f) {
    return f.contains("properties") && f["properties"].is_object() ? f["properties"] : Json::object();
  };
  // Nodes, then elements, then restrictions, so references resolve.
  for (int pass = 0; pass < 3; ++pass) {
    for (std::size_t k = 0; k < list.size(); ++k) {
      const Json& f = list[k];
      const Json props = props_of(f);
      const bool restriction = props.value("feature_type", "") == "restriction";
      const std::string gtype =
          f.contains("geometry") && f["geometry"].is_object() ? f["geometry"].value("type", "") : "";
      const int want = restriction ? 2 : gtype == "Point" ? 0 : gtype == "LineString" ? 1 : -1;
      if (pass == 0 && want == -1) {
        report.skipped.push_back({record_label(f, k), "validation: unsupported road feature geometry '" + gtype + "'"});
        continue;
      }
      if (want != pass) continue;
      const std::string label = record_label(f, k);
      each_record(report, label, [&] {
        if (label.starts_with("#")) throw Error(Errc::validation, "road feature has no id");
        if (pass == 0) {
          store.add_node({label, parse_position(f["geometry"].at("coordinates"))});
        } else if (pass == 1) {
          RoadElement e;
          e.id = label;
          e.from = props.at("from").get<std::string>();
          e.to = props.at("to").get<std::string>();
          e.geometry = parse_geometry(f["geometry"]).coords;
          e.maxspeed_kmh = props.value("maxspeed", 50.0);
          if (!(e.maxspeed_kmh > 0)) throw Error(Errc::validation, "maxspeed must be positive");
          e.name = props.value("name", "");
          e.lanes = props.value("lanes", 1);
          const bool oneway = props.value("oneway", false);
          RoadElement back = e;
          store.add_element(std::move(e));
          if (!oneway) {
            back.id += ":rev";
            std::swap(back.from, back.to);
            std::reverse(back.geometry.begin(), back.geometry.end());
            store.add_element(std::move(back));
          }
        } else {
          Restriction r;
          r.id = label;
          r.elements = props.at("elements").get<std::vector<std::string>>();
          r.kind = props.value("kind", "closed");
          r.active = props.value("active", true);
          store.add_restriction(std::move(r));
        }
      });
    }
  }
}

void ingest_heatmap(const Dataset& d, FeatureStore& store, FileReport& report) {
  if (d.crs() != "EPSG:4326") throw Error(Errc::config, "heatmap rasters must be in EPSG:4326");
  HeatmapDescriptor desc = HeatmapDescriptor::from_json(d.entry);
  std::vector<std::string> sources;
  if (d.entry.contains("frames"))
    sources = d.entry["frames"].get<std::vector<std::string>>();
  else
    sources.push_back(d.entry.at("path").get<std::string>());
  desc.frame_count = static_cast<int>(sources.size());
  desc.frame_files.clear();
  std::vector<ElevationGrid> frames;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    ElevationGrid g = read_grid(d.resolve(sources[k]));
    const std::string name = file_safe_id(desc.name) + "-" + std::to_string(k) + ".grid";
    const fs::path dst = *store.data_dir() / "heatmaps" / name;
    fs::create_directories(dst.parent_path());
    write_binary_grid(dst, g);
    desc.frame_files.push_back(rel(fs::path("heatmaps") / name));
    frames.push_back(std::move(g));
  }
  store.register_heatmap(std::move(desc), std::move(frames));
  report.accepted = 1;
}

void ingest_traffic(const Dataset& d, FeatureStore& store, FileReport& report) {
  each_line(d.path(), report, [&](const Json& j) {
    store.ingest_traffic({j.at("element").get<std::string>(), j.at("density").get<double>(),
                          parse_rfc3339(j.at("timestamp").get<std::string>())});
  });
}

void ingest_entity_catalog(const Dataset& d, FeatureStore& store, FileReport& report) {
  const Json cat = read_json_file(d.path().string());
  const Json& models = cat.is_array() ? cat : cat.at("models");
  const fs::path base = d.path().parent_path();
  for (std::size_t k = 0; k < models.size(); ++k) {
    const Json& m = models[k];
    each_record(report, m.value("id", "#" + std::to_string(k + 1)), [&] {
      EntityModel em{m.at("id").get<std::string>(), m.value("name", ""), ""};
      const fs::path p(m.at("path").get<std::string>());
      const fs::path src = p.is_absolute() ? p : base / p;
      if (!fs::is_regular_file(src)) throw Error(Errc::io, "missing model file " + src.string());
      const std::string name = "entity-" + file_safe_id(em.id) + ".glb";
      copy_into(src, *store.data_dir() / "models" / name);
      em.file = rel(fs::path("models") / name);
      store.add_entity_model(std::move(em));
    });
  }
}

void ingest_entity_instances(const Dataset& d, FeatureStore& store, FileReport& report) {
  const Json fc = read_geojson(d);
  const Json& list = features_of(fc);
  std::set<std::string> known;
  for (const auto& m : store.entity_models()) known.insert(m.id);
  for (std::size_t k = 0; k < list.size(); ++k) {
    const Json& f = list[k];
    const std::string label = record_label(f, k);
    each_record(report, label, [&] {
      if (label.starts_with("#")) throw Error(Errc::validation, "entity instance has no id");
      const Json props = f.value("properties", Json::object());
      const std::string model = props.at("model").get<std::string>();
      if (!known.count(model)) throw Error(Errc::not_found, "unknown entity model " + model);
      Feature feat;
      feat.id = label;
      feat.category = "Entity/" + model;
      feat.geometry = parse_geometry(f.at("geometry"));
      if (feat.geometry.kind != GeometryKind::point) throw Error(Errc::validation, "entity instances are points");
      feat.attributes = {{"model", model},
                         {"scale", props.value("scale", 1.0)},
                         {"rotation_deg", props.value("rotation_deg", 0.0)},
                         {"model_url", "/models/entity." + model}};
      store.upsert_feature(std::move(feat));
    });
  }
}

}  // namespace

IngestReport ingest_manifest(const fs::path& manifest, const fs::path& data_dir) {
  Json m;
  try {
    m = read_json_file(manifest.string());
  } catch (const Json::exception& e) {
    throw Error(Errc::validation, "manifest: " + std::string(e.what()));
  }
  if (!m.is_object() || !m.contains("datasets") || !m["datasets"].is_array())
    throw Error(Errc::validation, "manifest needs a \"datasets\" array");
  fs::create_directories(data_dir);
  auto store = FeatureStore::open(data_dir);

  // Footprint variants need their buildings and instances need their models,
  // so process kinds in dependency order; the manifest order breaks ties.
  static const std::vector<std::string> order = {"dtm",      "dsm",     "footprints",     "features",
                                                 "roads",    "traffic", "heatmap",        "entity-catalog",
                                                 "entity-instances"};
  std::vector<Dataset> datasets;
  const fs::path base = manifest.parent_path();
  for (std::size_t i = 0; i < m["datasets"].size(); ++i) {
    const Json& entry = m["datasets"][i];
    datasets.push_back({entry.is_object() ? entry.value("kind", "") : "", entry, base, i});
  }
  auto rank = [&](const Dataset& d) {
    const auto it = std::find(order.begin(), order.end(), d.kind);
    return static_cast<std::size_t>(it - order.begin());
  };
  std::stable_sort(datasets.begin(), datasets.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });

  IngestReport report;
  for (const Dataset& d : datasets) {
    FileReport f;
    f.kind = d.kind;
    f.path = d.entry.is_object() ? d.entry.value("path", d.entry.value("name", "")) : "";
    try {
      if (!d.entry.is_object()) throw Error(Errc::validation, "dataset entry must be an object");
      if (d.kind == "footprints") ingest_footprints(d, *store, f);
      else if (d.kind == "dtm" || d.kind == "dsm") ingest_raster(d, *store, f);
      else if (d.kind == "features") ingest_features(d, *store, f);
      else if (d.kind == "roads") ingest_roads(d, *store, f);
      else if (d.kind == "heatmap") ingest_heatmap(d, *store, f);
      else if (d.kind == "traffic") ingest_traffic(d, *store, f);
      else if (d.kind == "entity-catalog") ingest_entity_catalog(d, *store, f);
      else if (d.kind == "entity-instances") ingest_entity_instances(d, *store, f);
      else throw Error(Errc::validation, "unknown dataset kind '" + d.kind + "'");
    } catch (const Error& e) {
      f.error = std::string(to_string(e.code())) + ": " + e.what();
    } catch (const std::exception& e) {
      f.error = e.what();
    }
    if (f.failed())
      spdlog::error("{} {}: {}", f.kind, f.path, f.error);
    else
      spdlog::info("{} {}: {} accepted, {} skipped", f.kind, f.path, f.accepted, f.skipped.size());
    for (const auto& s : f.skipped) spdlog::warn("{} {}: skipped {}: {}", f.kind, f.path, s.record, s.reason);
    report.files.push_back(std::move(f));
  }
  store->compact();
  return report;
}

// ---------------------------------------------------------------------------
// Tileset build

Json building_summary(const BuildingModel& model, const Footprint& footprint) {
  Json props = {{"anchor", position_json(model.anchor)},
                {"height", model.height},
                {"ground_elevation", model.ground_elevation},
                {"base_elevation", model.base_elevation},
                {"lod", to_string(model.lod)},
                {"roof_planes", model.roof_planes.size()}};
  if (!footprint.name.empty()) props["name"] = footprint.name;
  return {{"type", "Feature"}, {"id", model.building_id}, {"geometry", to_geojson(footprint.polygon)}, {"properties", props}};
}

BuildReport build_tiles(const fs::path& data_dir, const BuildOptions& options) {
  if (!fs::is_directory(data_dir)) throw Error(Errc::not_found, "data directory " + data_dir.string() + " does not exist");
  const auto store = FeatureStore::open(data_dir);
  const auto footprints = store->footprints();
  const auto dtm = store->dtm();
  const auto dsm = store->dsm();
  const Tileset tileset = build_tileset(footprints, dsm->empty() ? nullptr : dsm.get(), *dtm, options);

  std::map<std::string, const Footprint*> by_id;
  for (const auto& f : footprints) by_id[f.id] = &f;

  const fs::path root = data_dir / "buildings";
  fs::remove_all(root);
  BuildReport report;
  for (const auto& [tile, models] : tileset.tiles) {
    const fs::path dir = root / std::to_string(tile.z) / std::to_string(tile.x) / std::to_string(tile.y);
    fs::create_directories(dir);
    Json list = Json::array();
    for (const auto& model : models) {
      const std::string file = file_safe_id(model.building_id) + ".glb";
      const auto glb = encode_glb(model);
      std::ofstream out(dir / file, std::ios::binary);
      out.write(reinterpret_cast<const char*>(glb.data()), static_cast<std::streamsize>(glb.size()));
      if (!out) throw Error(Errc::io, "cannot write " + (dir / file).string());
      list.push_back({{"feature", building_summary(model, *by_id.at(model.building_id))}, {"file", file}});
      ++report.buildings;
    }
    std::ofstream index(dir / "index.json");
    index << Json{{"tile", tile.to_string()}, {"buildings", list}}.dump(1) << '\n';
    if (!index) throw Error(Errc::io, "cannot write " + (dir / "index.json").string());
    ++report.tiles;
  }
  report.failures = tileset.failures;
  fs::create_directories(root);
  std::ofstream(root / "build_report.json") << report.to_json().dump(1) << '\n';
  return report;
}

}  // namespace citytwin
