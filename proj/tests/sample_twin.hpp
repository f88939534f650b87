#pragma once

#include <filesystem>
#include <string>

#include "citytwin/ingest.hpp"
#include "citytwin/server.hpp"
#include "test_util.hpp"

namespace testing {

inline std::filesystem::path sample_manifest() {
  return std::filesystem::path(CITYTWIN_SAMPLE_DIR) / "manifest.json";
}

// Ingests and builds the shipped sample dataset into a fresh directory.
struct SampleTwin {
  TempDir dir{"twin"};
  citytwin::IngestReport ingest;
  citytwin::BuildReport build;

  SampleTwin() {
    ingest = citytwin::ingest_manifest(sample_manifest(), dir.path());
    build = citytwin::build_tiles(dir.path());
  }

  std::unique_ptr<citytwin::TwinService> service(std::string token = "secret") const {
    citytwin::ServiceConfig config;
    config.token = std::move(token);
    config.clock = [] { return citytwin::TimestampMs{1718100000000}; };
    return citytwin::TwinService::from_data_dir(dir.path(), config);
  }
};

inline citytwin::HttpRequest get(std::string path, std::multimap<std::string, std::string> query = {}) {
  citytwin::HttpRequest r;
  r.path = std::move(path);
  r.query = std::move(query);
  return r;
}

inline citytwin::HttpRequest post(std::string path, std::string body, std::string token = "") {
  citytwin::HttpRequest r;
  r.method = "POST";
  r.path = std::move(path);
  r.body = std::move(body);
  if (!token.empty()) r.headers["authorization"] = "Bearer " + token;
  return r;
}

inline citytwin::Json body_json(const citytwin::HttpResponse& r) { return citytwin::Json::parse(r.body); }

}  // namespace testing
