#include <thread>

#include "citytwin/image_io.hpp"
#include "citytwin/terrain.hpp"
#include "citytwin/tile_pyramid.hpp"
#include "httplib.h"
#include "sample_twin.hpp"

using namespace citytwin;
using testing::body_json;
using testing::get;
using testing::post;

namespace {

const testing::SampleTwin& shared_twin() {
  static const testing::SampleTwin twin;
  return twin;
}

std::string error_code(const HttpResponse& r) { return body_json(r)["error"]["code"].get<std::string>(); }

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_SUITE("server") {

TEST_CASE("index, ETags and errors") {
  auto svc = shared_twin().service();
  const auto health = svc->handle(get("/health"));
  CHECK(health.status == 200);
  CHECK(body_json(health)["buildings"].get<int>() == static_cast<int>(svc->building_count()));
  CHECK(svc->building_count() > 40);

  const std::string etag = health.header("ETag");
  REQUIRE(etag.size() == 66);
  auto again = get("/health");
  again.headers["if-none-match"] = "W/" + etag + ", " + etag;
  const auto cached = svc->handle(again);
  CHECK(cached.status == 304);
  CHECK(cached.body.empty());
  again.headers["if-none-match"] = "\"other\"";
  CHECK(svc->handle(again).status == 200);

  const auto missing = svc->handle(get("/nope"));
  CHECK(missing.status == 404);
  CHECK(error_code(missing) == "not_found");
  auto put = get("/features");
  put.method = "PUT";
  CHECK(svc->handle(put).status == 405);
  CHECK(svc->handle(get("/tiles/buildings/3/9/0")).status == 400);
  CHECK(error_code(svc->handle(get("/features", {{"bbox", "1,2,3"}}))) == "bad_bbox");
}

TEST_CASE("features, series and last") {
  auto svc = shared_twin().service();
  const auto all = body_json(svc->handle(get("/features", {{"bbox", "-180,-90,180,90"}})));
  // 26 sensor and POI features plus 6 placed entity instances.
  CHECK(all["features"].size() == 32);
  CHECK(all["next_offset"].is_null());

  const auto page = body_json(svc->handle(get("/features", {{"bbox", "-180,-90,180,90"}, {"limit", "10"}, {"offset", "30"}})));
  CHECK(page["features"].size() == 2);
  CHECK(page["next_offset"].is_null());
  const auto first = body_json(svc->handle(get("/features", {{"bbox", "-180,-90,180,90"}, {"limit", "10"}})));
  CHECK(first["next_offset"] == 10);
  CHECK(svc->handle(get("/features", {{"bbox", "-180,-90,180,90"}, {"limit", "0"}})).status == 400);

  const auto env = body_json(svc->handle(get("/features", {{"bbox", "-180,-90,180,90"}, {"categories", "Environment"}})));
  for (const auto& f : env["features"])
    CHECK(f["properties"]["category"].get<std::string>().rfind("Environment/", 0) == 0);

  CHECK(body_json(svc->handle(get("/features/dev1")))["id"] == "dev1");
  CHECK(error_code(svc->handle(get("/features/ghost"))) == "not_found");

  const auto series = body_json(svc->handle(get("/features/dev1/series", {{"metric", "no2"}})));
  const auto& obs = series["observations"];
  REQUIRE(obs.size() > 2);
  for (std::size_t i = 1; i < obs.size(); ++i)
    CHECK(parse_rfc3339(obs[i - 1]["timestamp"].get<std::string>()) < parse_rfc3339(obs[i]["timestamp"].get<std::string>()));
  const auto last = body_json(svc->handle(get("/features/dev1/last", {{"metric", "no2"}})));
  CHECK(last["timestamp"] == obs.back()["timestamp"]);
  CHECK(svc->handle(get("/features/dev1/last", {{"metric", "nothing"}})).status == 404);
  CHECK(error_code(svc->handle(get("/features/dev1/series", {{"metric", "no2"}, {"from", "soon"}}))) == "bad_time");
}

TEST_CASE("observations are live without a rebuild") {
  testing::SampleTwin twin;
  auto svc = twin.service("tok");
  const std::string line =
      R"({"device":"dev2","metric":"no2","value":123.25,"unit":"ug/m3","timestamp":"2030-01-01T00:00:00Z"})";
  CHECK(svc->handle(post("/observations", line)).status == 401);
  CHECK(svc->handle(post("/observations", line, "wrong")).status == 401);
  const auto r = svc->handle(post("/observations", line + "\n{bad json}\n" +
                                                       R"({"device":"ghost","metric":"x","value":1,"timestamp":"2030-01-01T00:00:00Z"})",
                                  "tok"));
  REQUIRE(r.status == 200);
  const auto j = body_json(r);
  CHECK(j["accepted"] == 1);
  REQUIRE(j["rejected"].size() == 2);
  CHECK(j["rejected"][0]["line"] == 2);
  CHECK(j["rejected"][1]["code"] == "not_found");
  CHECK(body_json(svc->handle(get("/features/dev2/last", {{"metric", "no2"}})))["value"] == 123.25);

  // The write was journaled.
  svc.reset();
  CHECK(body_json(twin.service()->handle(get("/features/dev2/last", {{"metric", "no2"}})))["value"] == 123.25);
}

TEST_CASE("what-if endpoints on the golden scenario") {
  auto svc = shared_twin().service();
  const Json golden = read_json_file(std::string(CITYTWIN_SAMPLE_DIR) + "/whatif_golden.json");
  const auto created = svc->handle(post("/whatif/scenarios", golden["area"].dump()));
  REQUIRE(created.status == 201);
  const auto s = body_json(created);
  CHECK(created.header("Location") == "/whatif/scenarios/" + s["id"].get<std::string>());
  CHECK(s["created"] == "2024-06-11T10:00:00Z");
  CHECK_FALSE(s["blocked_elements"].empty());
  CHECK(body_json(svc->handle(get("/whatif/scenarios/" + s["id"].get<std::string>()))) == s);

  auto lonlat = [&](const char* k) {
    return std::to_string(golden[k][0].get<double>()) + "," + std::to_string(golden[k][1].get<double>());
  };
  const auto cmp = body_json(svc->handle(get("/whatif/compare", {{"from", lonlat("from")}, {"to", lonlat("to")}, {"scenario", s["id"]}})));
  const double base = cmp["baseline"]["properties"]["cost_s"], alt = cmp["scenario"]["properties"]["cost_s"];
  CHECK(alt > base);
  const auto route = body_json(svc->handle(get("/whatif/route", {{"from", lonlat("from")}, {"to", lonlat("to")}, {"scenario", s["id"]}})));
  CHECK(route["properties"]["cost_s"] == alt);
  CHECK(route["geometry"]["type"] == "LineString");
  CHECK(svc->handle(post("/whatif/scenarios", "{")).status == 400);
  CHECK(svc->handle(post("/whatif/scenarios", R"({"type":"FeatureCollection","features":[]})")).status == 400);
  CHECK(svc->handle(get("/whatif/route", {{"from", "0,0"}, {"to", lonlat("to")}})).status == 422);
  CHECK(error_code(svc->handle(get("/whatif/compare", {{"from", lonlat("from")}, {"to", lonlat("to")}, {"scenario", "s99"}}))) ==
        "not_found");
}

TEST_CASE("building tiles") {
  auto svc = shared_twin().service();
  const TileId lo = tile_for_point({11.2475, 43.7760}, 14), hi = tile_for_point({11.2550, 43.7685}, 14);
  std::vector<TileId> regions;
  for (auto y = lo.y; y <= hi.y; ++y)
    for (auto x = lo.x; x <= hi.x; ++x) regions.push_back({14, x, y});

  std::size_t coarse_total = 0, total = 0;
  Json coarse;
  for (const auto& region : regions) {
    const auto j = body_json(svc->handle(get("/tiles/buildings/" + region.to_string())));
    coarse_total += j["features"].size();
    if (!j["features"].empty()) coarse = j;
    for (const auto& t : descendants_at(region, 18)) {
      const auto fine = body_json(svc->handle(get("/tiles/buildings/" + t.to_string())));
      total += fine["features"].size();
      for (const auto& f : fine["features"]) {
        const GeoPoint a = parse_position(f["properties"]["anchor"]);
        CHECK(tile_for_point(a, 18) == t);
        CHECK(f["properties"]["model"].get<std::string>().ends_with(".lod1"));
      }
    }
  }
  CHECK(coarse_total == svc->building_count());
  CHECK(total == svc->building_count());

  const auto b = coarse["features"][0];
  const GeoPoint a = parse_position(b["properties"]["anchor"]);
  const auto fine = body_json(svc->handle(get("/tiles/buildings/" + tile_for_point(a, 20).to_string())));
  REQUIRE(fine["features"].size() >= 1);

  const auto glb = svc->handle(get(b["properties"]["model"].get<std::string>()));
  CHECK(glb.status == 200);
  CHECK(glb.content_type == "model/gltf-binary");
  CHECK(glb.body.substr(0, 4) == "glTF");
}

TEST_CASE("model variants") {
  auto svc = shared_twin().service();
  const auto list = body_json(svc->handle(get("/buildings/b001/models")));
  std::vector<std::string> ids;
  for (const auto& v : list["variants"]) ids.push_back(v["variant_id"]);
  CHECK(ids == std::vector<std::string>{"lod1", "detailed"});
  CHECK(svc->handle(get("/models/b001.detailed")).status == 200);
  CHECK(svc->handle(get("/models/entity.tree")).status == 200);
  CHECK(svc->handle(get("/models/b001.nothing")).status == 404);
  CHECK(svc->handle(get("/buildings/nobody/models")).status == 404);
}

TEST_CASE("terrain and heatmap rasters") {
  auto svc = shared_twin().service();
  const auto png = svc->handle(get("/tiles/dtm/14/8704/5972.png"));
  REQUIRE(png.status == 200);
  const auto img = decode_png(bytes(png.body));
  CHECK(img.width == 256);
  const auto dtm = svc->store().dtm();
  const auto pc = pixel_center({14, 8704, 5972}, 256, 128, 128);
  const auto want = dtm->sample(pc);
  const std::size_t at = (128 * 256 + 128) * 3;
  const double got = decode_elevation({img.pixels[at], img.pixels[at + 1], img.pixels[at + 2]});
  if (want) {
    CHECK(got <= *want + 1e-9);
    CHECK(got >= *want - 0.1 - 1e-9);
  }

  const auto heat = svc->handle(get("/tiles/heatmap/no2/16/34820/23889.png"));
  CHECK(heat.status == 200);
  CHECK(decode_png(bytes(heat.body)).format == PixelFormat::rgba8);
  const auto gif = svc->handle(get("/tiles/heatmap/temperature/16/34820/23889.gif"));
  REQUIRE(gif.status == 200);
  CHECK(inspect_gif(bytes(gif.body)).delays_cs == std::vector<int>{40, 40, 40, 40});
  CHECK(svc->handle(get("/tiles/heatmap/ghost/16/34820/23889.png")).status == 404);

  const auto list = body_json(svc->handle(get("/heatmaps")));
  CHECK(list["heatmaps"].size() == 2);

  const auto wms = svc->handle(get("/wms", {{"REQUEST", "GetMap"}, {"LAYERS", "no2"}, {"CRS", "CRS:84"},
                                            {"BBOX", "11.24,43.76,11.26,43.78"}, {"WIDTH", "64"}, {"HEIGHT", "32"}}));
  REQUIRE(wms.status == 200);
  const auto w = decode_png(bytes(wms.body));
  CHECK(w.width == 64);
  CHECK(w.height == 32);
  CHECK(svc->handle(get("/wms", {{"REQUEST", "GetCapabilities"}})).status == 400);
}

TEST_CASE("traffic and sun") {
  auto svc = shared_twin().service();
  const auto t = body_json(svc->handle(get("/traffic", {{"bbox", "11.24,43.76,11.27,43.79"}})));
  REQUIRE_FALSE(t["features"].empty());
  for (const auto& f : t["features"]) {
    const double d = f["properties"]["density"], p = f["properties"]["arrow_period_s"];
    CHECK(p == doctest::Approx(arrow_period(d)));
  }
  const auto s = body_json(svc->handle(get("/sun", {{"lat", "43.77"}, {"lon", "11.25"}, {"time", "2024-06-21T11:00:00Z"}})));
  CHECK(s["elevation_deg"].get<double>() > 60);
  CHECK(svc->handle(get("/sun", {{"lat", "95"}, {"lon", "11"}, {"time", "2024-06-21T11:00:00Z"}})).status == 400);
  CHECK(svc->handle(get("/sun", {{"lat", "43"}, {"lon", "11"}})).status == 400);
}

TEST_CASE("socket layer") {
  CHECK(parse_bind_address("0.0.0.0:9000") == std::pair<std::string, int>{"0.0.0.0", 9000});
  CHECK(parse_bind_address("8081") == std::pair<std::string, int>{"127.0.0.1", 8081});
  CHECK_ERRC(parse_bind_address("host:port"), Errc::config);

  auto svc = shared_twin().service();
  HttpServer server(*svc);
  const int port = server.bind("127.0.0.1", 0);
  std::thread runner([&] { server.run(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  const auto r = client.Get("/features/dev1");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(Json::parse(r->body)["id"] == "dev1");
  const auto etag = r->get_header_value("ETag");
  const auto again = client.Get("/features/dev1", {{"If-None-Match", etag}});
  REQUIRE(again);
  CHECK(again->status == 304);
  const auto q = client.Get("/features?bbox=-180,-90,180,90&limit=3");
  REQUIRE(q);
  CHECK(Json::parse(q->body)["features"].size() == 3);
  server.stop();
  runner.join();
}

}  // TEST_SUITE
