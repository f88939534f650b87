#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "citytwin/city_builder.hpp"
#include "citytwin/error.hpp"
#include "citytwin/feature_store.hpp"
#include "citytwin/whatif_router.hpp"

namespace httplib {
class Server;
}

namespace citytwin {

struct HttpRequest {
  std::string method = "GET";
  std::string path;
  std::multimap<std::string, std::string> query;
  std::map<std::string, std::string> headers;  ///< lower-case names
  std::string body;

  std::optional<std::string> param(const std::string& name) const;
  std::string header(const std::string& name) const;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;

  std::string header(const std::string& name) const;
};

/// One error shape for every endpoint: {"error": {"code", "message"}}.
struct ApiError {
  int status = 500;
  std::string code;
  std::string message;

  static ApiError from(const Error& e);
  HttpResponse response() const;
};

struct ServiceConfig {
  std::string token;  ///< bearer token for writes; empty disables writes
  int tile_size = 256;
  ArrowConfig arrows;
  RouterConfig router;
  std::function<TimestampMs()> clock;  ///< scenario creation times; defaults to the system clock
};

/// Request handling for the whole HTTP surface, independent of the socket
/// layer. GET responses carry a strong SHA-256 ETag and honour If-None-Match.
class TwinService {
 public:
  TwinService(std::shared_ptr<FeatureStore> store, ServiceConfig config);

  /// Opens the store in `data_dir` and loads the built tileset and model
  /// blobs. Throws Errc::not_found when the directory does not exist.
  static std::unique_ptr<TwinService> from_data_dir(const std::filesystem::path& data_dir, ServiceConfig config);

  HttpResponse handle(const HttpRequest& request);

  FeatureStore& store() { return *store_; }
  WhatIfRouter& router() { return *router_; }
  const VariantRegistry& variants() const { return variants_; }
  std::size_t building_count() const;

 private:
  struct BuildingEntry {
    std::string id;
    GeoPoint anchor;
    Json summary;
    std::filesystem::path glb_file;
  };

  void load_tileset(const std::filesystem::path& buildings_dir);
  void load_blobs();
  HttpResponse dispatch(const HttpRequest& request);

  HttpResponse building_tile(const TileId& t);
  HttpResponse dtm_tile(const TileId& t);
  HttpResponse heatmap_tile(const std::string& name, const TileId& t, const std::string& ext,
                            const HttpRequest& request);
  HttpResponse wms(const HttpRequest& request);
  HttpResponse features(const HttpRequest& request);
  HttpResponse feature(const std::string& id);
  HttpResponse series(const std::string& id, const HttpRequest& request);
  HttpResponse last(const std::string& id, const HttpRequest& request);
  HttpResponse post_observations(const HttpRequest& request);
  HttpResponse post_scenario(const HttpRequest& request);
  HttpResponse get_scenario(const std::string& id);
  HttpResponse route(const HttpRequest& request);
  HttpResponse compare(const HttpRequest& request);
  HttpResponse traffic(const HttpRequest& request);
  HttpResponse sun(const HttpRequest& request);
  HttpResponse models_of(const std::string& building_id);
  HttpResponse model_blob(const std::string& blob_id);
  HttpResponse heatmaps();
  HttpResponse index();

  void require_token(const HttpRequest& request) const;
  Json building_json(const BuildingEntry& b) const;

  std::shared_ptr<FeatureStore> store_;
  ServiceConfig config_;
  std::unique_ptr<WhatIfRouter> router_;
  std::map<TileId, std::vector<BuildingEntry>> buildings_;
  std::map<std::string, std::filesystem::path> lod1_files_;  // building id -> glb
  VariantRegistry variants_;
  std::map<std::string, std::vector<std::uint8_t>> entity_blobs_;
};

/// host:port -> (host, port); a bare port binds 127.0.0.1. Throws
/// Errc::config.
std::pair<std::string, int> parse_bind_address(const std::string& addr);

/// Binds a TwinService to an httplib server.
class HttpServer {
 public:
  explicit HttpServer(TwinService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~HttpServer();

  /// Port 0 picks a free port. Returns the bound port; throws Errc::io.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  TwinService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace citytwin
