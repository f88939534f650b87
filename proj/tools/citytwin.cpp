#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "citytwin/error.hpp"
#include "citytwin/ingest.hpp"
#include "citytwin/server.hpp"

namespace fs = std::filesystem;
using namespace citytwin;

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_ingest(const fs::path& manifest, const fs::path& data_dir) {
  const IngestReport report = ingest_manifest(manifest, data_dir);
  std::cout << report.to_json().dump(2) << '\n';
  return report.exit_code();
}

int run_build(const fs::path& data_dir) {
  const BuildReport report = build_tiles(data_dir);
  std::cout << report.to_json().dump(2) << '\n';
  return report.failures.empty() ? 0 : 1;
}

int run_serve(const std::string& addr, const fs::path& data_dir, const std::string& token,
              const std::optional<fs::path>& static_dir) {
  ServiceConfig config;
  config.token = token;
  auto service = TwinService::from_data_dir(data_dir, config);
  const auto [host, port] = parse_bind_address(addr);
  HttpServer server(*service, static_dir);
  const int bound = server.bind(host, port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::info("serving {} buildings from {} on http://{}:{}", service->building_count(), data_dir.string(), host,
               bound);
  if (token.empty()) spdlog::warn("no token configured: write endpoints are disabled");
  server.run();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"citytwin: ingest, build and serve a city digital twin"};
  app.require_subcommand(1);

  std::string data_dir = env_or("CITYTWIN_DATA_DIR", "./twin-data");
  std::string addr = env_or("CITYTWIN_ADDR", "127.0.0.1:8080");
  std::string token = env_or("CITYTWIN_TOKEN", "");
  std::string manifest;
  std::string static_dir;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  auto* ingest = app.add_subcommand("ingest", "Load the datasets listed in a manifest into the data directory");
  ingest->add_option("manifest", manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
  ingest->add_option("--data-dir", data_dir, "Data directory (env CITYTWIN_DATA_DIR)");

  auto* build = app.add_subcommand("build", "Build the z18 building tileset from ingested footprints");
  build->add_option("--data-dir", data_dir, "Data directory (env CITYTWIN_DATA_DIR)");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--addr", addr, "host:port (env CITYTWIN_ADDR)");
  serve->add_option("--data-dir", data_dir, "Data directory (env CITYTWIN_DATA_DIR)");
  serve->add_option("--token", token, "Bearer token for writes (env CITYTWIN_TOKEN)");
  serve->add_option("--static", static_dir, "Directory mounted at /viewer");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("citytwin"));
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*ingest) return run_ingest(manifest, data_dir);
    if (!fs::is_directory(data_dir)) {
      spdlog::error("data directory {} does not exist", data_dir);
      return 2;
    }
    if (*build) return run_build(data_dir);
    if (*serve)
      return run_serve(addr, data_dir, token, static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.code()), e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
