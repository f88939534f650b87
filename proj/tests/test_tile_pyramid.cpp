#include <algorithm>
#include <random>
#include <set>

#include "citytwin/geojson.hpp"
#include "citytwin/tile_pyramid.hpp"
#include "oracles/oracles.hpp"
#include "test_util.hpp"

using namespace citytwin;

TEST_SUITE("tile_pyramid") {

TEST_CASE("tile_for_point examples") {
  CHECK(tile_for_point({-180, kMaxLatitude}, 0) == TileId{0, 0, 0});
  CHECK(tile_for_point({0, 0}, 1) == TileId{1, 1, 1});
  CHECK_ERRC(tile_for_point({0, 86}, 3), Errc::range);
  CHECK_ERRC(tile_for_point({0, -89}, 3), Errc::range);
}

TEST_CASE("Florence golden tile") {
  const Json golden = read_json_file(std::string(CITYTWIN_GOLDEN_DIR) + "/florence_tile.json");
  const TileId t = tile_for_point({golden["lon"].get<double>(), golden["lat"].get<double>()}, golden["z"].get<int>());
  CHECK(t.z == golden["z"].get<int>());
  CHECK(t.x == golden["x"].get<std::uint32_t>());
  CHECK(t.y == golden["y"].get<std::uint32_t>());
  CHECK(t.to_string() == "18/139268/95553");
}

TEST_CASE("tile_for_point agrees with the slippy formula") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lon(-179.999, 179.999), lat(-85.0, 85.0);
  std::uniform_int_distribution<int> zoom(0, 22);
  for (int i = 0; i < 20000; ++i) {
    const double a = lon(rng), b = lat(rng);
    const int z = zoom(rng);
    const auto [x, y] = oracle::slippy(a, b, z);
    const TileId t = tile_for_point({a, b}, z);
    // Points a hair from a tile edge may round differently; allow that only
    // when the oracle itself sits on the boundary.
    if (t.x != x || t.y != y) {
      const GeoBBox box = tile_bounds(t);
      const double slack = 1e-9;
      CHECK((std::abs(a - box.min_lon) < slack || std::abs(a - box.max_lon) < slack ||
             std::abs(b - box.min_lat) < slack || std::abs(b - box.max_lat) < slack));
    }
  }
}

TEST_CASE("parent examples") {
  CHECK(parent({1, 1, 1}) == TileId{0, 0, 0});
  CHECK(parent({18, 139268, 95561}) == TileId{17, 69634, 47780});
  CHECK(parent({2, 3, 0}) == TileId{1, 1, 0});
  CHECK_ERRC(parent({0, 0, 0}), Errc::no_parent);
}

TEST_CASE("children examples") {
  auto c = children({0, 0, 0});
  std::set<TileId> got(c.begin(), c.end());
  CHECK(got == std::set<TileId>{{1, 0, 0}, {1, 1, 0}, {1, 0, 1}, {1, 1, 1}});
  c = children({1, 1, 0});
  got = {c.begin(), c.end()};
  CHECK(got == std::set<TileId>{{2, 2, 0}, {2, 3, 0}, {2, 2, 1}, {2, 3, 1}});
}

TEST_CASE("ancestor_at and descendants_at") {
  const TileId t{18, 139268, 95561};
  CHECK(ancestor_at(t, 16) == TileId{16, 34817, 23890});
  CHECK(ancestor_at(t, 18) == t);
  CHECK_ERRC(ancestor_at(t, 19), Errc::ordering);
  CHECK_ERRC(descendants_at(t, 17), Errc::ordering);
  CHECK(descendants_at(t, 18) == std::vector<TileId>{t});
  CHECK(descendants_at({3, 1, 2}, 5).size() == 16);
}

TEST_CASE("tile_bounds of the world tile") {
  const GeoBBox b = tile_bounds({0, 0, 0});
  CHECK(b.min_lon == doctest::Approx(-180));
  CHECK(b.max_lon == doctest::Approx(180));
  CHECK(b.min_lat == doctest::Approx(-85.05112878).epsilon(1e-9));
  CHECK(b.max_lat == doctest::Approx(85.05112878).epsilon(1e-9));
  const TileId t{12, 2177, 1493};
  const GeoBBox tb = tile_bounds(t);
  CHECK(tb.max_lat == doctest::Approx(oracle::tile_lat(t.y, t.z)).epsilon(1e-12));
  CHECK(tb.min_lat == doctest::Approx(oracle::tile_lat(t.y + 1, t.z)).epsilon(1e-12));
}

TEST_CASE("boundary points go south and east") {
  const TileId t{10, 544, 372};
  const GeoBBox b = tile_bounds(t);
  // The north-west corner belongs to t; the south-east corner to the diagonal
  // neighbour.
  CHECK(tile_for_point({b.min_lon, b.max_lat}, 10) == t);
  CHECK(tile_for_point({b.max_lon, b.min_lat}, 10) == TileId{10, 545, 373});
  CHECK(tile_contains(t, {b.min_lon, b.max_lat}));
  CHECK_FALSE(tile_contains(t, {b.max_lon, (b.min_lat + b.max_lat) / 2}));
}

TEST_CASE("property: parent of each child is the tile") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5000; ++i) {
    const int z = static_cast<int>(rng() % 28);
    const std::uint32_t n = 1u << z;
    const TileId t{z, static_cast<std::uint32_t>(rng() % n), static_cast<std::uint32_t>(rng() % n)};
    for (const auto& c : children(t)) CHECK(parent(c) == t);
  }
}

TEST_CASE("property: descendants then ancestor is identity") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 300; ++i) {
    const int z = static_cast<int>(rng() % 20);
    const std::uint32_t n = 1u << z;
    const TileId t{z, static_cast<std::uint32_t>(rng() % n), static_cast<std::uint32_t>(rng() % n)};
    const int dz = static_cast<int>(rng() % 7);
    const auto d = descendants_at(t, z + dz);
    CHECK(d.size() == (std::size_t{1} << (2 * dz)));
    std::set<TileId> unique(d.begin(), d.end());
    CHECK(unique.size() == d.size());
    for (const auto& c : d) CHECK(ancestor_at(c, z) == t);
  }
}

TEST_CASE("property: interior points map back to their tile") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < 5000; ++i) {
    const int z = static_cast<int>(rng() % 23);
    const std::uint32_t n = 1u << z;
    const TileId t{z, static_cast<std::uint32_t>(rng() % n), static_cast<std::uint32_t>(rng() % n)};
    const GeoBBox b = tile_bounds(t);
    const GeoPoint p{b.min_lon + u(rng) * (b.max_lon - b.min_lon), b.min_lat + u(rng) * (b.max_lat - b.min_lat)};
    CHECK(tile_for_point(p, z) == t);
  }
}

TEST_CASE("assign_to_tile") {
  const TileId t{18, 139268, 95553};
  const GeoBBox b = tile_bounds(t);
  const double w = b.max_lon - b.min_lon, h = b.max_lat - b.min_lat;

  SUBCASE("square inside one tile") {
    GeoPolygon sq{{{b.min_lon + 0.2 * w, b.min_lat + 0.2 * h},
                   {b.min_lon + 0.6 * w, b.min_lat + 0.2 * h},
                   {b.min_lon + 0.6 * w, b.min_lat + 0.6 * h},
                   {b.min_lon + 0.2 * w, b.min_lat + 0.6 * h}},
                  {}};
    CHECK(assign_to_tile(sq) == t);
  }
  SUBCASE("square symmetric about the east border") {
    GeoPolygon sq{{{b.max_lon - 0.25 * w, b.min_lat + 0.2 * h},
                   {b.max_lon + 0.25 * w, b.min_lat + 0.2 * h},
                   {b.max_lon + 0.25 * w, b.min_lat + 0.6 * h},
                   {b.max_lon - 0.25 * w, b.min_lat + 0.6 * h}},
                  {}};
    const GeoPoint c = footprint_centroid(sq);
    CHECK(c.lon == doctest::Approx(b.max_lon).epsilon(1e-12));
    // Centroid on the border: floor puts it in the eastern neighbour unless
    // rounding leaves it a hair west.
    const TileId got = assign_to_tile(sq);
    CHECK(got == tile_for_point(c, 18));
    CHECK((got == TileId{18, t.x + 1, t.y} || got == t));
  }
  SUBCASE("L-shape: area centroid wins over vertex mean") {
    // A long bar inside t, with a thin arm far into the east neighbour whose
    // vertices pull the vertex mean across the border.
    std::vector<std::pair<double, double>> ring = {
        {0.05, 0.05}, {3.5, 0.05}, {3.5, 0.07}, {0.25, 0.07}, {0.25, 0.95}, {0.05, 0.95}};
    GeoPolygon poly;
    double mx = 0;
    for (auto [x, y] : ring) {
      poly.outer.push_back({b.min_lon + x * w, b.min_lat + y * h});
      mx += x;
    }
    mx /= ring.size();
    REQUIRE(mx > 1.0);  // vertex mean lies in the neighbour
    const auto [cx, cy] = oracle::shoelace_centroid(ring);
    REQUIRE(cx < 1.0);
    CHECK(assign_to_tile(poly) == t);
    const GeoPoint c = footprint_centroid(poly);
    CHECK(c.lon == doctest::Approx(b.min_lon + cx * w).epsilon(1e-12));
    CHECK(c.lat == doctest::Approx(b.min_lat + cy * h).epsilon(1e-12));
  }
  SUBCASE("zero-area polygon falls back to vertex mean") {
    GeoPolygon line{{{b.min_lon + 0.1 * w, b.min_lat + 0.5 * h},
                     {b.min_lon + 0.3 * w, b.min_lat + 0.5 * h},
                     {b.min_lon + 0.5 * w, b.min_lat + 0.5 * h}},
                    {}};
    const GeoPoint c = footprint_centroid(line);
    CHECK(c.lon == doctest::Approx(b.min_lon + 0.3 * w));
    CHECK(assign_to_tile(line) == t);
  }
}

TEST_CASE("property: assign_to_tile ignores vertex order and rotation") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 500; ++i) {
    // Star-shaped polygon around a random centre near Florence.
    const GeoPoint c{11.25 + 0.01 * u(rng), 43.77 + 0.01 * u(rng)};
    const int n = 3 + static_cast<int>(rng() % 9);
    GeoPolygon poly;
    for (int k = 0; k < n; ++k) {
      const double ang = 2 * kPi * k / n;
      const double r = 0.0002 * (1.2 + u(rng));
      poly.outer.push_back({c.lon + r * std::cos(ang), c.lat + r * std::sin(ang)});
    }
    const TileId ref = assign_to_tile(poly);
    GeoPolygon rev = poly;
    std::reverse(rev.outer.begin(), rev.outer.end());
    CHECK(assign_to_tile(rev) == ref);
    for (int k = 1; k < n; ++k) {
      GeoPolygon rot = poly;
      std::rotate(rot.outer.begin(), rot.outer.begin() + k, rot.outer.end());
      CHECK(assign_to_tile(rot) == ref);
    }
  }
}

namespace {

bool inside_quad(const std::array<GeoPoint, 4>& q, const GeoPoint& p) {
  std::vector<std::pair<double, double>> ring;
  for (const auto& v : q) ring.emplace_back(v.lon, v.lat);
  return oracle::inside(ring, p.lon, p.lat);
}

GeoPoint sample_quad(const std::array<GeoPoint, 4>& q, double s, double t) {
  // Bilinear parametrisation of the (convex) trapezoid.
  const GeoPoint near{q[0].lon + s * (q[1].lon - q[0].lon), q[0].lat + s * (q[1].lat - q[0].lat)};
  const GeoPoint far{q[3].lon + s * (q[2].lon - q[3].lon), q[3].lat + s * (q[2].lat - q[3].lat)};
  return {near.lon + t * (far.lon - near.lon), near.lat + t * (far.lat - near.lat)};
}

}  // namespace

TEST_CASE("tiles_in_view: top-down view is the bbox cover at base zoom") {
  ViewFrustum v;
  v.camera = {11.2558, 43.7696};
  v.base_zoom = 16;
  v.falloff = 2;
  v.pitch_deg = 0;
  const auto tiles = tiles_in_view(v);
  REQUIRE_FALSE(tiles.empty());
  const auto q = view_trapezoid(v);
  GeoBBox box = GeoBBox::empty();
  for (const auto& p : q) box.extend(p);
  std::set<TileId> expected;
  const TileId nw = tile_for_point({box.min_lon, box.max_lat}, 16);
  const TileId se = tile_for_point({box.max_lon, box.min_lat}, 16);
  for (auto x = nw.x; x <= se.x; ++x)
    for (auto y = nw.y; y <= se.y; ++y) {
      // A tile that only touches the bbox edge has no interior in the view.
      const GeoBBox tb = tile_bounds({16, x, y});
      if (tb.min_lon >= box.max_lon || tb.max_lat <= box.min_lat) continue;
      expected.insert({16, x, y});
    }
  std::set<TileId> got;
  for (const auto& vt : tiles) {
    CHECK(vt.tile.z == 16);
    CHECK(vt.band == 0);
    got.insert(vt.tile);
  }
  CHECK(got == expected);
}

TEST_CASE("tiles_in_view: falloff 0 keeps every tile at base zoom") {
  ViewFrustum v;
  v.camera = {2.35, 48.85};
  v.base_zoom = 15;
  v.falloff = 0;
  v.pitch_deg = 60;
  v.heading_deg = 35;
  for (const auto& vt : tiles_in_view(v)) CHECK(vt.tile.z == 15);
}

TEST_CASE("property: oblique views are covered without overlap") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 40; ++trial) {
    ViewFrustum v;
    v.camera = {-170 + 340 * u(rng), -70 + 140 * u(rng)};
    v.heading_deg = 360 * u(rng);
    v.pitch_deg = 75 * u(rng);
    v.base_zoom = 10 + static_cast<int>(rng() % 8);
    v.falloff = static_cast<int>(rng() % 4);
    const auto tiles = tiles_in_view(v);
    // The view is a straight-edged quad in Mercator, not in lon/lat, so all
    // geometry below is done on the unit square.
    std::array<GeoPoint, 4> q;
    const auto geo = view_trapezoid(v);
    for (int i = 0; i < 4; ++i) q[i] = {lon_to_unit(geo[i].lon), lat_to_unit(geo[i].lat)};

    // No two tiles overlap: none is an ancestor of another.
    for (std::size_t i = 0; i < tiles.size(); ++i)
      for (std::size_t j = 0; j < tiles.size(); ++j)
        if (i != j) CHECK_FALSE(is_ancestor_or_self(tiles[i].tile, tiles[j].tile));

    // Monte-Carlo coverage of the trapezoid.
    for (int k = 0; k < 400; ++k) {
      const GeoPoint p = sample_quad(q, u(rng), u(rng));
      if (p.lon < 0 || p.lon > 1 || p.lat < 0 || p.lat > 1) continue;
      const bool covered = std::any_of(tiles.begin(), tiles.end(), [&](const ViewTile& vt) {
        const double n = std::ldexp(1.0, vt.tile.z);
        return p.lon >= vt.tile.x / n && p.lon <= (vt.tile.x + 1) / n && p.lat >= vt.tile.y / n &&
               p.lat <= (vt.tile.y + 1) / n;
      });
      CHECK(covered);
    }

    // No tile is disjoint from the trapezoid.
    for (const auto& vt : tiles) {
      const double n = std::ldexp(1.0, vt.tile.z);
      const double x0 = vt.tile.x / n, y0 = vt.tile.y / n, x1 = (vt.tile.x + 1) / n, y1 = (vt.tile.y + 1) / n;
      const std::array<GeoPoint, 4> rect{GeoPoint{x0, y0}, GeoPoint{x1, y0}, GeoPoint{x1, y1}, GeoPoint{x0, y1}};
      bool touches = false;
      for (const auto& c : q) touches = touches || (c.lon >= x0 && c.lon <= x1 && c.lat >= y0 && c.lat <= y1);
      for (const auto& corner : rect) touches = touches || inside_quad(q, corner);
      for (int e = 0; e < 4 && !touches; ++e)
        for (int f = 0; f < 4 && !touches; ++f)
          touches = segments_intersect({q[e].lon, q[e].lat}, {q[(e + 1) % 4].lon, q[(e + 1) % 4].lat},
                                       {rect[f].lon, rect[f].lat}, {rect[(f + 1) % 4].lon, rect[(f + 1) % 4].lat});
      CHECK_MESSAGE(touches, vt.tile.to_string());
    }

    // Near to far.
    for (std::size_t i = 1; i < tiles.size(); ++i) CHECK(tiles[i - 1].distance <= tiles[i].distance);
  }
}

}  // TEST_SUITE
