#include "citytwin/server.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "citytwin/compositor.hpp"
#include "citytwin/error.hpp"
#include "citytwin/image_io.hpp"
#include "citytwin/sun.hpp"
#include "citytwin/terrain.hpp"
#include "httplib.h"

namespace citytwin {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Request / response plumbing

std::optional<std::string> HttpRequest::param(const std::string& name) const {
  auto it = query.find(name);
  if (it == query.end()) return std::nullopt;
  return it->second;
}

std::string HttpRequest::header(const std::string& name) const {
  std::string key = name;
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  auto it = headers.find(key);
  return it == headers.end() ? std::string{} : it->second;
}

std::string HttpResponse::header(const std::string& name) const {
  for (const auto& [k, v] : headers)
    if (k == name) return v;
  return {};
}

namespace {

int status_for(Errc code) {
  switch (code) {
    case Errc::not_found:
    case Errc::empty_tile: return 404;
    case Errc::unauthorized: return 401;
    case Errc::insufficient_data:
    case Errc::geometry:
    case Errc::no_route:
    case Errc::blocked_by_scenario:
    case Errc::no_nearby_road: return 422;
    case Errc::fetch_failed: return 502;
    case Errc::io:
    case Errc::config: return 500;
    default: return 400;
  }
}

ApiError bad(std::string code, std::string message) { return {400, std::move(code), std::move(message)}; }

HttpResponse json_response(const Json& j, int status = 200) {
  HttpResponse r;
  r.status = status;
  r.content_type = "application/json";
  r.body = j.dump();
  return r;
}

HttpResponse binary_response(std::vector<std::uint8_t> bytes, const std::string& type) {
  HttpResponse r;
  r.content_type = type;
  r.body.assign(bytes.begin(), bytes.end());
  return r;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

bool etag_matches(const std::string& if_none_match, const std::string& etag) {
  if (if_none_match.empty()) return false;
  if (if_none_match == "*") return true;
  std::stringstream ss(if_none_match);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    std::string tag = item.substr(b, e - b + 1);
    if (tag.rfind("W/", 0) == 0) continue;  // strong comparison only
    if (tag == etag) return true;
  }
  return false;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::optional<double> to_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> to_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

GeoBBox parse_bbox(const std::optional<std::string>& text) {
  if (!text) throw bad("bad_bbox", "bbox=min_lon,min_lat,max_lon,max_lat is required");
  const auto parts = split(*text, ',');
  if (parts.size() != 4) throw bad("bad_bbox", "bbox needs four comma-separated numbers");
  double v[4];
  for (int k = 0; k < 4; ++k) {
    const auto d = to_double(parts[k]);
    if (!d) throw bad("bad_bbox", "bbox component '" + parts[k] + "' is not a number");
    v[k] = *d;
  }
  const GeoBBox b{v[0], v[1], v[2], v[3]};
  if (!b.valid() || b.min_lon < -180 || b.max_lon > 180 || b.min_lat < -90 || b.max_lat > 90)
    throw bad("bad_bbox", "bbox must be ordered min_lon,min_lat,max_lon,max_lat within WGS84 range");
  return b;
}

GeoPoint parse_lonlat(const std::optional<std::string>& text, const char* name) {
  if (!text) throw bad("bad_request", std::string(name) + "=lon,lat is required");
  const auto parts = split(*text, ',');
  const auto lon = parts.size() == 2 ? to_double(parts[0]) : std::nullopt;
  const auto lat = parts.size() == 2 ? to_double(parts[1]) : std::nullopt;
  if (!lon || !lat || std::abs(*lon) > 180 || std::abs(*lat) > 90)
    throw bad("bad_request", std::string(name) + " must be lon,lat in degrees");
  return {*lon, *lat};
}

TileId parse_tile(const std::string& z, const std::string& x, const std::string& y) {
  const auto zz = to_int(z), xx = to_int(x), yy = to_int(y);
  if (!zz || !xx || !yy || *zz < 0 || *zz > kMaxZoom) throw ApiError{400, "range", "zoom out of range"};
  const long long n = 1LL << *zz;
  if (*xx < 0 || *yy < 0 || *xx >= n || *yy >= n) throw ApiError{400, "range", "tile index out of range"};
  return {static_cast<int>(*zz), static_cast<std::uint32_t>(*xx), static_cast<std::uint32_t>(*yy)};
}

std::optional<TimestampMs> parse_time(const std::optional<std::string>& text) {
  if (!text) return std::nullopt;
  try {
    return parse_rfc3339(*text);
  } catch (const Error& e) {
    throw bad("bad_time", e.what());
  }
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Scalar raster over a set of pixel positions; nodata and out-of-grid -> NaN.
template <typename PixelToGeo>
RgbaImage render_heatmap(const HeatmapLayer& layer, int frame, int width, int height, PixelToGeo&& at) {
  const ElevationGrid& grid = layer.frames.at(frame);
  std::vector<double> values(static_cast<std::size_t>(width) * height);
#pragma omp parallel for schedule(static)
  for (int py = 0; py < height; ++py)
    for (int px = 0; px < width; ++px)
      values[static_cast<std::size_t>(py) * width + px] = grid.sample(at(px, py)).value_or(std::nan(""));
  return apply_colormap(values, width, height, layer.descriptor.colormap, layer.descriptor.opacity);
}

}  // namespace

ApiError ApiError::from(const Error& e) { return {status_for(e.code()), std::string(to_string(e.code())), e.what()}; }

HttpResponse ApiError::response() const {
  return json_response({{"error", {{"code", code}, {"message", message}}}}, status);
}

// ---------------------------------------------------------------------------
// Service setup

TwinService::TwinService(std::shared_ptr<FeatureStore> store, ServiceConfig config)
    : store_(std::move(store)), config_(std::move(config)) {
  if (!config_.clock)
    config_.clock = [] {
      return std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::system_clock::now().time_since_epoch())
          .count();
    };
  router_ = std::make_unique<WhatIfRouter>(store_->road_graph(), config_.router);
}

std::unique_ptr<TwinService> TwinService::from_data_dir(const fs::path& data_dir, ServiceConfig config) {
  if (!fs::is_directory(data_dir)) throw Error(Errc::not_found, "data directory " + data_dir.string() + " does not exist");
  std::shared_ptr<FeatureStore> store = FeatureStore::open(data_dir);
  auto service = std::make_unique<TwinService>(std::move(store), std::move(config));
  service->load_tileset(data_dir / "buildings");
  service->load_blobs();
  return service;
}

void TwinService::load_tileset(const fs::path& dir) {
  const fs::path root = dir / std::to_string(kBuildingZoom);
  if (!fs::is_directory(root)) return;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().filename() != "index.json") continue;
    const Json index = read_json_file(entry.path().string());
    const auto parts = split(index.at("tile").get<std::string>(), '/');
    const TileId tile = parse_tile(parts.at(0), parts.at(1), parts.at(2));
    auto& list = buildings_[tile];
    for (const auto& b : index.at("buildings")) {
      BuildingEntry e;
      e.summary = b.at("feature");
      e.id = e.summary.at("id").get<std::string>();
      e.anchor = parse_position(e.summary.at("properties").at("anchor"));
      e.glb_file = entry.path().parent_path() / b.at("file").get<std::string>();
      lod1_files_[e.id] = e.glb_file;
      variants_.add_building(e.id);
      list.push_back(std::move(e));
    }
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  }
}

void TwinService::load_blobs() {
  const auto& dir = store_->data_dir();
  if (!dir) return;
  for (const auto& v : store_->variants()) {
    if (!variants_.has_building(v.building_id)) {
      spdlog::warn("variant {} for unbuilt building {} ignored", v.variant_id, v.building_id);
      continue;
    }
    variants_.register_variant(v.building_id, v.variant_id, read_file(*dir / v.file), v.lod);
  }
  for (const auto& m : store_->entity_models()) entity_blobs_["entity." + m.id] = read_file(*dir / m.file);
}

std::size_t TwinService::building_count() const {
  std::size_t n = 0;
  for (const auto& [t, list] : buildings_) n += list.size();
  return n;
}

// ---------------------------------------------------------------------------
// Dispatch

HttpResponse TwinService::handle(const HttpRequest& request) {
  HttpResponse response;
  try {
    response = dispatch(request);
  } catch (const ApiError& e) {
    response = e.response();
  } catch (const Error& e) {
    response = ApiError::from(e).response();
  } catch (const Json::exception& e) {
    response = bad("bad_request", e.what()).response();
  } catch (const std::exception& e) {
    spdlog::error("{} {}: {}", request.method, request.path, e.what());
    response = ApiError{500, "internal", e.what()}.response();
  }
  response.headers.emplace_back("Access-Control-Allow-Origin", "*");
  if (request.method == "GET" && response.status == 200) {
    const std::string etag = "\"" + sha256_hex(response.body) + "\"";
    response.headers.emplace_back("ETag", etag);
    response.headers.emplace_back("Cache-Control", "no-cache");
    if (etag_matches(request.header("if-none-match"), etag)) {
      response.status = 304;
      response.body.clear();
    }
  }
  return response;
}

HttpResponse TwinService::dispatch(const HttpRequest& req) {
  static const std::regex building_tile_re(R"(^/tiles/buildings/(\d+)/(\d+)/(\d+)(\.json)?$)");
  static const std::regex dtm_tile_re(R"(^/tiles/dtm/(\d+)/(\d+)/(\d+)\.png$)");
  static const std::regex heatmap_tile_re(R"(^/tiles/heatmap/([A-Za-z0-9_-]+)/(\d+)/(\d+)/(\d+)\.(png|gif)$)");
  static const std::regex feature_re(R"(^/features/([^/]+)$)");
  static const std::regex series_re(R"(^/features/([^/]+)/series$)");
  static const std::regex last_re(R"(^/features/([^/]+)/last$)");
  static const std::regex scenario_re(R"(^/whatif/scenarios/([^/]+)$)");
  static const std::regex models_re(R"(^/buildings/([^/]+)/models$)");
  static const std::regex blob_re(R"(^/models/([^/]+)$)");

  const std::string& p = req.path;
  std::smatch m;
  if (req.method == "POST") {
    if (p == "/observations") return post_observations(req);
    if (p == "/whatif/scenarios") return post_scenario(req);
    throw ApiError{404, "not_found", "no POST route " + p};
  }
  if (req.method != "GET") throw ApiError{405, "method_not_allowed", req.method + " is not supported"};

  if (std::regex_match(p, m, building_tile_re)) return building_tile(parse_tile(m[1], m[2], m[3]));
  if (std::regex_match(p, m, dtm_tile_re)) return dtm_tile(parse_tile(m[1], m[2], m[3]));
  if (std::regex_match(p, m, heatmap_tile_re)) return heatmap_tile(m[1], parse_tile(m[2], m[3], m[4]), m[5], req);
  if (p == "/wms") return wms(req);
  if (p == "/features") return features(req);
  if (std::regex_match(p, m, series_re)) return series(m[1], req);
  if (std::regex_match(p, m, last_re)) return last(m[1], req);
  if (std::regex_match(p, m, feature_re)) return feature(m[1]);
  if (std::regex_match(p, m, scenario_re)) return get_scenario(m[1]);
  if (p == "/whatif/route") return route(req);
  if (p == "/whatif/compare") return compare(req);
  if (p == "/traffic") return traffic(req);
  if (p == "/sun") return sun(req);
  if (std::regex_match(p, m, models_re)) return models_of(m[1]);
  if (std::regex_match(p, m, blob_re)) return model_blob(m[1]);
  if (p == "/heatmaps") return heatmaps();
  if (p == "/" || p == "/health") return index();
  throw ApiError{404, "not_found", "no route " + p};
}

void TwinService::require_token(const HttpRequest& req) const {
  if (config_.token.empty()) throw ApiError{401, "unauthorized", "writes are disabled: no token configured"};
  if (req.header("authorization") != "Bearer " + config_.token)
    throw ApiError{401, "unauthorized", "missing or wrong bearer token"};
}

// ---------------------------------------------------------------------------
// Tiles

Json TwinService::building_json(const BuildingEntry& b) const {
  Json f = b.summary;
  Json ids = Json::array();
  for (const auto& v : variants_.list_variants(b.id)) ids.push_back(v.variant_id);
  f["properties"]["variants"] = ids;
  f["properties"]["model"] = "/models/" + VariantRegistry::blob_id_for(b.id, "lod1");
  return f;
}

HttpResponse TwinService::building_tile(const TileId& t) {
  Json features = Json::array();
  if (t.z == kBuildingZoom) {
    if (auto it = buildings_.find(t); it != buildings_.end())
      for (const auto& b : it->second) features.push_back(building_json(b));
  } else if (t.z < kBuildingZoom) {
    // Coarser request: every z18 descendant, in tile order.
    for (const auto& [tile, list] : buildings_)
      if (ancestor_at(tile, t.z) == t)
        for (const auto& b : list) features.push_back(building_json(b));
  } else {
    // Finer request: the z18 ancestor's buildings whose anchor falls inside.
    if (auto it = buildings_.find(ancestor_at(t, kBuildingZoom)); it != buildings_.end())
      for (const auto& b : it->second)
        if (tile_contains(t, b.anchor)) features.push_back(building_json(b));
  }
  return json_response({{"type", "FeatureCollection"}, {"tile", t.to_string()}, {"features", features}});
}

HttpResponse TwinService::dtm_tile(const TileId& t) {
  const auto dtm = store_->dtm();
  const RgbTile tile = encode_tile(*dtm, t, config_.tile_size);
  return binary_response(encode_png(tile.rgb, tile.size, tile.size, PixelFormat::rgb8), "image/png");
}

HttpResponse TwinService::heatmap_tile(const std::string& name, const TileId& t, const std::string& ext,
                                       const HttpRequest& req) {
  const auto layer = store_->heatmap(name);
  const auto& d = layer->descriptor;
  if (layer->frames.empty()) throw Error(Errc::not_found, "heatmap " + name + " has no raster data");
  const int size = config_.tile_size;
  auto at = [&](int px, int py) { return pixel_center(t, size, px, py); };

  std::optional<int> frame;
  if (auto f = req.param("frame")) {
    const auto v = to_int(*f);
    if (!v) throw bad("bad_request", "frame must be an integer");
    if (*v < 0 || *v >= d.frame_count)
      throw ApiError{400, "range", "frame " + *f + " outside [0, " + std::to_string(d.frame_count) + ")"};
    frame = static_cast<int>(*v);
  }
  const bool gif = ext == "gif" || (d.animated && !frame);
  if (!gif) {
    const RgbaImage img = render_heatmap(*layer, frame.value_or(0), size, size, at);
    return binary_response(encode_png(to_rgba8(img), size, size, PixelFormat::rgba8), "image/png");
  }
  std::vector<GifFrame> frames;
  const int first = frame.value_or(0);
  const int last = frame ? first + 1 : d.frame_count;
  for (int k = first; k < last; ++k)
    frames.push_back({to_rgba8(render_heatmap(*layer, k, size, size, at)), d.delay_cs});
  return binary_response(encode_gif(frames, size, size), "image/gif");
}

HttpResponse TwinService::wms(const HttpRequest& req) {
  // Parameter names are case-insensitive in WMS.
  std::map<std::string, std::string> q;
  for (const auto& [k, v] : req.query) {
    std::string key = k;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::toupper(c); });
    q.emplace(key, v);
  }
  auto get = [&](const char* k) -> std::optional<std::string> {
    auto it = q.find(k);
    return it == q.end() ? std::nullopt : std::optional(it->second);
  };
  if (get("REQUEST").value_or("") != "GetMap") throw bad("bad_request", "only REQUEST=GetMap is supported");
  const std::string version = get("VERSION").value_or("1.3.0");
  const std::string crs = get("CRS").value_or(get("SRS").value_or("CRS:84"));
  if (crs != "CRS:84" && crs != "EPSG:4326") throw bad("bad_request", "CRS must be CRS:84 or EPSG:4326");
  if (get("FORMAT").value_or("image/png") != "image/png") throw bad("bad_request", "FORMAT must be image/png");
  GeoBBox box = parse_bbox(get("BBOX"));
  if (crs == "EPSG:4326" && version == "1.3.0")  // axis order lat,lon
    box = {box.min_lat, box.min_lon, box.max_lat, box.max_lon};
  if (!box.valid()) throw bad("bad_bbox", "empty bbox");
  const auto w = to_int(get("WIDTH").value_or("")), h = to_int(get("HEIGHT").value_or(""));
  if (!w || !h || *w < 1 || *h < 1 || *w > 4096 || *h > 4096)
    throw bad("bad_request", "WIDTH and HEIGHT must be integers in [1, 4096]");
  const int width = static_cast<int>(*w), height = static_cast<int>(*h);
  const auto names = split(get("LAYERS").value_or(""), ',');
  if (names.empty() || names[0].empty()) throw bad("bad_request", "LAYERS is required");
  int frame = 0;
  if (auto f = get("FRAME")) {
    const auto v = to_int(*f);
    if (!v || *v < 0) throw bad("bad_request", "FRAME must be a non-negative integer");
    frame = static_cast<int>(*v);
  }

  auto at = [&](int px, int py) {
    return GeoPoint{box.min_lon + (px + 0.5) / width * (box.max_lon - box.min_lon),
                    box.max_lat - (py + 0.5) / height * (box.max_lat - box.min_lat)};
  };
  std::vector<RgbaImage> images;
  for (const auto& name : names) {
    const auto layer = store_->heatmap(name);
    if (frame >= layer->descriptor.frame_count) throw ApiError{400, "range", "FRAME beyond " + name + " frames"};
    if (layer->frames.empty()) throw Error(Errc::not_found, "heatmap " + name + " has no raster data");
    images.push_back(render_heatmap(*layer, frame, width, height, at));
  }
  std::vector<CompositeLayer> stack;
  for (const auto& img : images) stack.push_back({&img, 1.0});
  const RgbaImage out = composite(stack);
  return binary_response(encode_png(to_rgba8(out), width, height, PixelFormat::rgba8), "image/png");
}

// ---------------------------------------------------------------------------
// Features and observations

HttpResponse TwinService::features(const HttpRequest& req) {
  const GeoBBox box = parse_bbox(req.param("bbox"));
  std::vector<std::string> categories;
  if (auto c = req.param("categories"))
    for (auto& s : split(*c, ','))
      if (!s.empty()) categories.push_back(s);
  const auto limit = to_int(req.param("limit").value_or("1000"));
  const auto offset = to_int(req.param("offset").value_or("0"));
  if (!limit || *limit < 1 || *limit > 10000) throw bad("bad_request", "limit must be in [1, 10000]");
  if (!offset || *offset < 0) throw bad("bad_request", "offset must be >= 0");

  const auto found = store_->query_bbox(box, categories, static_cast<std::size_t>(*offset + *limit + 1));
  Json list = Json::array();
  for (std::size_t i = static_cast<std::size_t>(*offset); i < found.size() && list.size() < static_cast<std::size_t>(*limit); ++i)
    list.push_back(found[i].to_geojson());
  const bool more = found.size() > static_cast<std::size_t>(*offset + *limit);
  return json_response({{"type", "FeatureCollection"},
                        {"features", list},
                        {"offset", *offset},
                        {"limit", *limit},
                        {"next_offset", more ? Json(*offset + *limit) : Json(nullptr)}});
}

HttpResponse TwinService::feature(const std::string& id) { return json_response(store_->get_feature(id).to_geojson()); }

HttpResponse TwinService::series(const std::string& id, const HttpRequest& req) {
  const auto metric = req.param("metric");
  if (!metric || metric->empty()) throw bad("bad_request", "metric is required");
  const auto from = parse_time(req.param("from"));
  const auto to = parse_time(req.param("to"));
  const auto obs = store_->time_series(id, *metric, from.value_or(kMinTimestamp), to.value_or(kMaxTimestamp));
  Json list = Json::array();
  for (const auto& o : obs)
    list.push_back({{"value", o.value}, {"unit", o.unit}, {"timestamp", format_rfc3339(o.timestamp)}});
  return json_response({{"device", id},
                        {"metric", *metric},
                        {"from", from ? Json(format_rfc3339(*from)) : Json(nullptr)},
                        {"to", to ? Json(format_rfc3339(*to)) : Json(nullptr)},
                        {"observations", list}});
}

HttpResponse TwinService::last(const std::string& id, const HttpRequest& req) {
  const auto metric = req.param("metric");
  if (!metric || metric->empty()) throw bad("bad_request", "metric is required");
  const auto o = store_->last_value(id, *metric);
  if (!o) throw ApiError{404, "no_data", "no observations of " + *metric + " for " + id};
  return json_response(o->to_json());
}

HttpResponse TwinService::post_observations(const HttpRequest& req) {
  require_token(req);
  std::size_t accepted = 0;
  Json rejected = Json::array();
  std::stringstream ss(req.body);
  std::string line;
  for (std::size_t n = 1; std::getline(ss, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      store_->ingest_observation(Observation::from_json(Json::parse(line)));
      ++accepted;
    } catch (const Error& e) {
      rejected.push_back({{"line", n}, {"code", to_string(e.code())}, {"message", e.what()}});
    } catch (const Json::exception& e) {
      rejected.push_back({{"line", n}, {"code", "validation"}, {"message", e.what()}});
    }
  }
  return json_response({{"accepted", accepted}, {"rejected", rejected}});
}

// ---------------------------------------------------------------------------
// What-if

HttpResponse TwinService::post_scenario(const HttpRequest& req) {
  Json body;
  try {
    body = Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    throw bad("bad_request", std::string("body is not JSON: ") + e.what());
  }
  const auto s = router_->create_scenario(ScenarioAreas::from_geojson(body), config_.clock());
  HttpResponse r = json_response(s->to_json(), 201);
  r.headers.emplace_back("Location", "/whatif/scenarios/" + s->id);
  return r;
}

HttpResponse TwinService::get_scenario(const std::string& id) { return json_response(router_->scenario(id)->to_json()); }

HttpResponse TwinService::route(const HttpRequest& req) {
  const GeoPoint from = parse_lonlat(req.param("from"), "from");
  const GeoPoint to = parse_lonlat(req.param("to"), "to");
  const auto scenario = req.param("scenario");
  Json j = router_->route(from, to, scenario).to_geojson();
  j["properties"]["scenario"] = scenario ? Json(*scenario) : Json(nullptr);
  return json_response(j);
}

HttpResponse TwinService::compare(const HttpRequest& req) {
  const GeoPoint from = parse_lonlat(req.param("from"), "from");
  const GeoPoint to = parse_lonlat(req.param("to"), "to");
  const auto scenario = req.param("scenario");
  if (!scenario) throw bad("bad_request", "scenario is required");
  const auto s = router_->scenario(*scenario);
  const auto [base, alt] = router_->compare(from, to, *scenario);
  return json_response({{"scenario_id", *scenario},
                        {"blocked_elements", std::vector<std::string>(s->blocked.begin(), s->blocked.end())},
                        {"baseline", base.to_geojson()},
                        {"scenario", alt.to_geojson()}});
}

// ---------------------------------------------------------------------------
// Traffic, sun, models

HttpResponse TwinService::traffic(const HttpRequest& req) {
  const GeoBBox box = parse_bbox(req.param("bbox"));
  Json list = Json::array();
  for (const auto& t : store_->traffic_in_bbox(box, config_.arrows))
    list.push_back({{"type", "Feature"},
                    {"id", t.segment.element_id},
                    {"geometry", linestring_json(t.geometry)},
                    {"properties",
                     {{"element", t.segment.element_id},
                      {"density", t.segment.density},
                      {"timestamp", format_rfc3339(t.segment.timestamp)},
                      {"arrow_period_s", t.arrow_period_s}}}});
  return json_response({{"type", "FeatureCollection"}, {"features", list}});
}

HttpResponse TwinService::sun(const HttpRequest& req) {
  const auto lat = to_double(req.param("lat").value_or(""));
  const auto lon = to_double(req.param("lon").value_or(""));
  if (!lat || !lon || std::abs(*lat) > 90 || std::abs(*lon) > 180)
    throw bad("bad_request", "lat and lon must be degrees within range");
  const auto t = parse_time(req.param("time"));
  if (!t) throw bad("bad_request", "time (RFC3339 UTC) is required");
  const SunPosition s = sun_position(*lat, *lon, *t);
  return json_response({{"lat", *lat},
                        {"lon", *lon},
                        {"time", format_rfc3339(*t)},
                        {"azimuth_deg", s.azimuth_deg},
                        {"elevation_deg", s.elevation_deg}});
}

HttpResponse TwinService::models_of(const std::string& building_id) {
  Json list = Json::array();
  for (const auto& v : variants_.list_variants(building_id))
    list.push_back({{"variant_id", v.variant_id},
                    {"lod", to_string(v.lod)},
                    {"blob_id", v.blob_id},
                    {"url", "/models/" + v.blob_id}});
  return json_response({{"building_id", building_id}, {"variants", list}});
}

HttpResponse TwinService::model_blob(const std::string& blob_id) {
  static const std::string kLod1 = ".lod1";
  if (blob_id.size() > kLod1.size() && blob_id.ends_with(kLod1)) {
    auto it = lod1_files_.find(blob_id.substr(0, blob_id.size() - kLod1.size()));
    if (it != lod1_files_.end()) return binary_response(read_file(it->second), "model/gltf-binary");
  }
  if (const auto* blob = variants_.blob(blob_id)) return binary_response(*blob, "model/gltf-binary");
  if (auto it = entity_blobs_.find(blob_id); it != entity_blobs_.end())
    return binary_response(it->second, "model/gltf-binary");
  throw Error(Errc::not_found, "unknown model " + blob_id);
}

HttpResponse TwinService::heatmaps() {
  Json list = Json::array();
  for (const auto& name : store_->heatmap_names()) {
    Json d = store_->heatmap(name)->descriptor.to_json();
    d.erase("frames");
    list.push_back(std::move(d));
  }
  return json_response({{"heatmaps", list}});
}

HttpResponse TwinService::index() {
  return json_response({{"service", "citytwin"},
                        {"buildings", building_count()},
                        {"features", store_->feature_count()},
                        {"heatmaps", store_->heatmap_names()},
                        {"endpoints",
                         {"/tiles/buildings/{z}/{x}/{y}", "/tiles/dtm/{z}/{x}/{y}.png",
                          "/tiles/heatmap/{name}/{z}/{x}/{y}.png", "/wms", "/features", "/features/{id}",
                          "/features/{id}/series", "/features/{id}/last", "/observations", "/whatif/scenarios",
                          "/whatif/route", "/whatif/compare", "/traffic", "/sun", "/buildings/{id}/models",
                          "/models/{blob-id}", "/heatmaps"}}});
}

// ---------------------------------------------------------------------------
// Socket binding

std::pair<std::string, int> parse_bind_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  const std::string host = colon == std::string::npos ? "127.0.0.1" : addr.substr(0, colon);
  const std::string port_text = colon == std::string::npos ? addr : addr.substr(colon + 1);
  const auto port = to_int(port_text);
  if (!port || *port < 0 || *port > 65535 || host.empty())
    throw Error(Errc::config, "bind address must be host:port, got '" + addr + "'");
  return {host, static_cast<int>(*port)};
}

HttpServer::HttpServer(TwinService& service, std::optional<fs::path> static_dir)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  if (static_dir && !server_->set_mount_point("/viewer", static_dir->string()))
    throw Error(Errc::config, "static directory " + static_dir->string() + " does not exist");
  auto adapter = [this](const httplib::Request& in, httplib::Response& out) {
    HttpRequest req;
    req.method = in.method;
    req.path = in.path;
    for (const auto& [k, v] : in.params) req.query.emplace(k, v);
    for (const auto& [k, v] : in.headers) {
      std::string key = k;
      std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
      req.headers.emplace(key, v);
    }
    req.body = in.body;
    HttpResponse res = service_.handle(req);
    out.status = res.status;
    for (const auto& [k, v] : res.headers) out.set_header(k, v);
    if (res.status != 304) out.set_content(res.body, res.content_type);
  };
  server_->Get(".*", adapter);
  server_->Post(".*", adapter);
  server_->Put(".*", adapter);
  server_->Delete(".*", adapter);
  server_->Patch(".*", adapter);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace citytwin
