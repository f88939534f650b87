#include <map>
#include <random>

#include "citytwin/terrain.hpp"
#include "oracles/oracles.hpp"
#include "terrain_fixtures.hpp"
#include "test_util.hpp"

using namespace citytwin;

using testing::check_mesh;
using testing::fractal;
using testing::make_grid;
using testing::MeshCheck;

TEST_SUITE("terrain") {

TEST_CASE("codec examples") {
  CHECK(encode_elevation(0.0) == Rgb{1, 134, 160});
  CHECK(encode_elevation(-10000.0) == Rgb{0, 0, 0});
  CHECK(encode_elevation(123.4) == Rgb{1, 139, 114});
  CHECK(decode_elevation({1, 134, 160}) == 0.0);
  CHECK(decode_elevation({0, 0, 0}) == -10000.0);
  CHECK(decode_elevation({255, 255, 255}) == 1667721.5);
  CHECK(encode_elevation(kMaxElevation) == Rgb{255, 255, 255});
  CHECK(decode_elevation(kNodataRgb) == kMinElevation);
  CHECK_ERRC(encode_elevation(-10000.01), Errc::range);
  CHECK_ERRC(encode_elevation(1667721.6), Errc::range);
  CHECK_ERRC(encode_elevation(NAN), Errc::range);
}

TEST_CASE("codec agrees with the integer equations on every tenth") {
  for (long long tenths = -100000; tenths <= 100000; tenths += 7) {
    const auto o = oracle::encode_tenths(tenths);
    const Rgb c = encode_elevation(static_cast<double>(tenths) / 10.0);
    CHECK(c == Rgb{static_cast<std::uint8_t>(o.r), static_cast<std::uint8_t>(o.g), static_cast<std::uint8_t>(o.b)});
    CHECK(decode_elevation(c) == oracle::decode(o.r, o.g, o.b));
  }
}

TEST_CASE("property: round trip within one quantum below") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-10000, 10000);
  for (int i = 0; i < 200000; ++i) {
    const double v = u(rng);
    const double back = decode_elevation(encode_elevation(v));
    CHECK(back <= v);
    CHECK(back >= v - 0.1);
  }
}

TEST_CASE("property: encoding is monotone") {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(-10000, 10000);
  for (int i = 0; i < 100000; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    if (a < b - 0.1) CHECK(packed(encode_elevation(a)) < packed(encode_elevation(b)));
    CHECK(packed(encode_elevation(a)) <= packed(encode_elevation(b)));
  }
}

TEST_CASE("sampling") {
  ElevationGrid g = make_grid(3, 2, 10.0, 45.0, 0.5);
  g.values = {10, 20, 30, 40, 50, 60};
  CHECK(*g.sample(g.position(1, 0)) == 20.0);
  CHECK(*g.sample(g.position(2, 1)) == 60.0);
  CHECK(*g.sample({10.25, 45.0}) == doctest::Approx(15.0));
  CHECK(*g.sample({10.25, 44.75}) == doctest::Approx(30.0));
  CHECK_FALSE(g.sample({9.99, 45.0}).has_value());
  CHECK_FALSE(g.sample({10.5, 45.01}).has_value());
  g.values[0] = g.nodata;
  CHECK_FALSE(g.sample({10.25, 44.75}).has_value());
  CHECK(g.sample({10.75, 44.75}).has_value());
}

TEST_CASE("property: sampling matches an independent bilinear") {
  std::mt19937_64 rng(107);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    ElevationGrid g = make_grid(5 + static_cast<int>(rng() % 20), 5 + static_cast<int>(rng() % 20), 11.0, 43.0, 0.001);
    for (auto& v : g.values) v = static_cast<float>(u(rng) < 0.05 ? g.nodata : 500 * u(rng));
    for (int k = 0; k < 2000; ++k) {
      const GeoPoint p{g.west - 0.001 + u(rng) * (g.width + 1) * g.dx, g.north + 0.001 - u(rng) * (g.height + 1) * g.dy};
      const auto want = oracle::bilinear(g.values, g.width, g.height, g.west, g.north, g.dx, g.dy, g.nodata, p.lon, p.lat);
      const auto got = g.sample(p);
      REQUIRE(want.has_value() == got.has_value());
      if (want) CHECK(*got == doctest::Approx(*want).epsilon(1e-9));
    }
  }
}

TEST_CASE("merged terrain") {
  ElevationGrid base = make_grid(11, 11, 11.0, 44.0, 0.01, 100.0f);
  ElevationGrid patch = make_grid(3, 3, 11.03, 43.97, 0.01, 250.0f);
  patch.priority = 5;
  SUBCASE("single grid is identity") {
    MergedTerrain m({base});
    CHECK(*m.sample({11.055, 43.955}) == *base.sample({11.055, 43.955}));
    CHECK_FALSE(m.sample({10.9, 43.9}).has_value());
  }
  SUBCASE("high-priority patch wins inside") {
    MergedTerrain m({base, patch});
    CHECK(*m.sample({11.04, 43.96}) == 250.0);
    CHECK(*m.sample({11.08, 43.92}) == 100.0);
    MergedTerrain reversed({patch, base});
    CHECK(*reversed.sample({11.04, 43.96}) == 250.0);
  }
}

TEST_CASE("property: merge equals a linear scan by priority") {
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<ElevationGrid> grids;
    const int n = 2 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) {
      ElevationGrid g = make_grid(4 + static_cast<int>(rng() % 8), 4 + static_cast<int>(rng() % 8),
                                  11.0 + 0.02 * u(rng), 44.0 - 0.02 * u(rng), 0.004 + 0.004 * u(rng));
      for (auto& v : g.values) v = static_cast<float>(u(rng) < 0.1 ? g.nodata : 1000 * u(rng));
      g.priority = static_cast<int>(rng() % 3);
      grids.push_back(std::move(g));
    }
    MergedTerrain m(grids);
    // Oracle: stable order by descending priority, first grid with a value.
    std::vector<std::size_t> order(grids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return grids[a].priority > grids[b].priority; });
    for (int k = 0; k < 1000; ++k) {
      const GeoPoint p{11.0 + 0.06 * u(rng), 44.0 - 0.06 * u(rng)};
      std::optional<double> want;
      for (std::size_t idx : order) {
        const auto& g = grids[idx];
        if ((want = oracle::bilinear(g.values, g.width, g.height, g.west, g.north, g.dx, g.dy, g.nodata, p.lon, p.lat)))
          break;
      }
      const auto got = m.sample(p);
      REQUIRE(got.has_value() == want.has_value());
      if (want) CHECK(*got == doctest::Approx(*want).epsilon(1e-9));
    }
  }
}

TEST_CASE("property: merge ignores registration order among distinct priorities") {
  std::mt19937_64 rng(113);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ElevationGrid> grids;
  for (int i = 0; i < 4; ++i) {
    ElevationGrid g = make_grid(8, 8, 11.0 + 0.01 * i, 44.0 - 0.005 * i, 0.01);
    for (auto& v : g.values) v = static_cast<float>(100 * u(rng));
    g.priority = i * 3;
    grids.push_back(std::move(g));
  }
  MergedTerrain a(grids);
  std::reverse(grids.begin(), grids.end());
  MergedTerrain b(grids);
  std::swap(grids[0], grids[2]);
  MergedTerrain c(grids);
  for (int k = 0; k < 2000; ++k) {
    const GeoPoint p{11.0 + 0.1 * u(rng), 44.0 - 0.1 * u(rng)};
    CHECK(a.sample(p) == b.sample(p));
    CHECK(a.sample(p) == c.sample(p));
  }
}

TEST_CASE("encode_tile") {
  const TileId t{14, 8704, 5972};
  const GeoBBox b = tile_bounds(t);
  ElevationGrid g = make_grid(9, 9, b.min_lon - 0.01, b.max_lat + 0.01, (b.max_lon - b.min_lon + 0.02) / 8, 0.0f);
  g.dy = (b.max_lat - b.min_lat + 0.02) / 8;
  MergedTerrain m({g});
  SUBCASE("constant zero grid") {
    const RgbTile tile = encode_tile(m, t, 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) CHECK(tile.pixel(x, y) == Rgb{1, 134, 160});
  }
  SUBCASE("deterministic") { CHECK(encode_tile(m, t).rgb == encode_tile(m, t).rgb); }
  SUBCASE("no coverage") { CHECK_ERRC(encode_tile(m, {14, 100, 100}), Errc::empty_tile); }
  SUBCASE("outside coverage is nodata") {
    const TileId nb{14, t.x + 1, t.y};
    ElevationGrid small = make_grid(3, 3, b.min_lon, b.max_lat, (b.max_lon - b.min_lon) / 4, 5.0f);
    MergedTerrain ms({small});
    const RgbTile tile = encode_tile(ms, t, 16);
    CHECK(tile.pixel(15, 15) == kNodataRgb);
    CHECK(tile.pixel(1, 1) == encode_elevation(5.0));
    CHECK_ERRC(encode_tile(ms, nb), Errc::empty_tile);
  }
}

TEST_CASE("tessellate shapes") {
  CHECK_ERRC(tessellate(make_grid(64, 64, 0, 0, 1), 1.0), Errc::shape);
  CHECK_ERRC(tessellate(make_grid(65, 33, 0, 0, 1), 1.0), Errc::shape);
  for (int k = 1; k <= 6; ++k) {
    const int side = (1 << k) + 1;
    const auto mesh = tessellate(fractal(side, k), 0.0);
    CHECK(mesh.triangles.size() == static_cast<std::size_t>(2 * (1 << k) * (1 << k)));
    CHECK(mesh.vertices.size() == static_cast<std::size_t>(side * side));
  }
}

TEST_CASE("planar grids need two triangles") {
  ElevationGrid g = make_grid(65, 65, 11.0, 44.0, 0.0001);
  for (int j = 0; j < 65; ++j)
    for (int i = 0; i < 65; ++i) g.at(i, j) = static_cast<float>(2 * i - 3 * j + 500);
  for (double e : {1e-9, 0.5, 2.0}) {
    const auto mesh = tessellate(g, e);
    CHECK(mesh.triangles.size() == 2);
    CHECK(mesh.vertices.size() == 4);
  }
}

TEST_CASE("property: tessellation error bound holds at every sample") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const ElevationGrid g = fractal(33, 200 + seed);
    for (double e : {0.0, 0.25, 1.0, 5.0}) {
      const auto mesh = tessellate(g, e);
      const MeshCheck c = check_mesh(g, mesh);
      CHECK(c.covered);
      CHECK(c.edges_ok);
      CHECK(c.area == doctest::Approx(32.0 * 32.0));
      CHECK(c.worst <= e + 1e-6);
      for (const auto& t : mesh.triangles) {
        // Non-degenerate and counter-clockwise in (lon, lat).
        const auto& a = mesh.vertices[t[0]];
        const auto& b = mesh.vertices[t[1]];
        const auto& cc = mesh.vertices[t[2]];
        CHECK((b.x - a.x) * (cc.y - a.y) - (cc.x - a.x) * (b.y - a.y) > 0);
      }
    }
  }
}

TEST_CASE("pad_for_tessellation replicates edges") {
  ElevationGrid g = make_grid(5, 3, 0, 0, 1);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 5; ++i) g.at(i, j) = static_cast<float>(10 * j + i);
  const ElevationGrid p = pad_for_tessellation(g);
  CHECK(p.width == 5);
  CHECK(p.height == 5);
  CHECK(p.at(4, 4) == g.at(4, 2));
  CHECK(p.at(1, 3) == g.at(1, 2));
  const ElevationGrid big = pad_for_tessellation(make_grid(40, 20, 0, 0, 1));
  CHECK(big.width == 65);
  CHECK_NOTHROW(tessellate(big, 1.0));
}

TEST_CASE("grid files round trip") {
  testing::TempDir dir("grid");
  ElevationGrid g = make_grid(7, 5, 11.25, 43.78, 0.0001);
  std::mt19937_64 rng(127);
  for (auto& v : g.values) v = static_cast<float>(rng() % 10000) / 8.0f;
  g.values[3] = g.nodata;
  g.priority = 4;

  write_binary_grid(dir / "a.grid", g);
  const ElevationGrid b = read_grid(dir / "a.grid");
  CHECK(b.values == g.values);
  CHECK(b.width == 7);
  CHECK(b.height == 5);
  CHECK(b.west == g.west);
  CHECK(b.north == g.north);
  CHECK(b.priority == 4);

  write_ascii_grid(dir / "a.asc", g);
  const ElevationGrid a = read_grid(dir / "a.asc");
  CHECK(a.width == 7);
  CHECK(a.west == doctest::Approx(g.west).epsilon(1e-12));
  CHECK(a.north == doctest::Approx(g.north).epsilon(1e-12));
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    if (g.is_nodata(g.values[i])) CHECK(a.is_nodata(a.values[i]));
    else CHECK(a.values[i] == doctest::Approx(g.values[i]));
  }

  testing::spit(dir / "bad.asc", "ncols 2\nnrows\n");
  CHECK_ERRC(read_grid(dir / "bad.asc"), Errc::validation);
  CHECK_ERRC(read_grid(dir / "missing.grid"), Errc::io);
}

TEST_CASE("ASCII corner and centre registration") {
  testing::TempDir dir("asc");
  testing::spit(dir / "corner.asc",
                "ncols 2\nnrows 2\nxllcorner 10\nyllcorner 40\ncellsize 1\nNODATA_value -1\n1 2\n3 -1\n");
  const ElevationGrid c = read_ascii_grid(dir / "corner.asc");
  CHECK(c.west == 10.5);
  CHECK(c.north == 41.5);
  CHECK(c.is_nodata(c.at(1, 1)));
  testing::spit(dir / "centre.asc", "ncols 2\nnrows 2\nxllcenter 10\nyllcenter 40\ncellsize 1\n1 2\n3 4\n");
  const ElevationGrid m = read_ascii_grid(dir / "centre.asc");
  CHECK(m.west == 10.0);
  CHECK(m.north == 41.0);
  CHECK(m.at(0, 1) == 3.0f);
}

}  // TEST_SUITE
