#include <random>

#include "citytwin/compositor.hpp"
#include "citytwin/kernels.hpp"
#include "citytwin/terrain.hpp"
#include "test_util.hpp"

using namespace citytwin;

namespace {

ElevationGrid noisy_grid(int side, std::uint64_t seed, double west, double north, double step) {
  ElevationGrid g;
  g.width = g.height = side;
  g.west = west;
  g.north = north;
  g.dx = g.dy = step;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < side * side; ++i) g.values.push_back(static_cast<float>(u(rng) < 0.02 ? g.nodata : 50 + 30 * u(rng)));
  return g;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("sample_tile and encode_raster agree bit for bit") {
  const TileId t{15, 17408, 11945};
  const GeoBBox b = tile_bounds(t);
  ElevationGrid g = noisy_grid(40, 401, b.min_lon - 0.001, b.max_lat + 0.0005, (b.max_lon - b.min_lon) / 30);
  MergedTerrain m({g});
  std::vector<double> s(128 * 128), p(128 * 128);
  serial::sample_tile(m, t, 128, s);
  parallel::sample_tile(m, t, 128, p);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(((std::isnan(s[i]) && std::isnan(p[i])) || s[i] == p[i]));

  std::vector<std::uint8_t> rs(s.size() * 3), rp(s.size() * 3);
  serial::encode_raster(s, rs);
  parallel::encode_raster(s, rp);
  CHECK(rs == rp);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Rgb c{rs[3 * i], rs[3 * i + 1], rs[3 * i + 2]};
    if (std::isnan(s[i])) CHECK(c == kNodataRgb);
    else CHECK(c == encode_elevation(s[i]));
  }
}

TEST_CASE("encode_raster clamps out-of-range input") {
  const std::vector<double> v = {-20000.0, 2e6, NAN, 0.0};
  std::vector<std::uint8_t> rgb(12);
  serial::encode_raster(v, rgb);
  CHECK(Rgb{rgb[0], rgb[1], rgb[2]} == Rgb{0, 0, 0});
  CHECK(Rgb{rgb[3], rgb[4], rgb[5]} == Rgb{255, 255, 255});
  CHECK(Rgb{rgb[6], rgb[7], rgb[8]} == kNodataRgb);
  CHECK(Rgb{rgb[9], rgb[10], rgb[11]} == Rgb{1, 134, 160});
}

TEST_CASE("RTIN deviations agree and bound the error table") {
  for (int side : {3, 5, 17, 65}) {
    const ElevationGrid g = noisy_grid(side, 409 + side, 0, 0, 1);
    std::vector<float> h = g.values;
    for (auto& v : h)
      if (g.is_nodata(v)) v = 0;
    const auto s = serial::rtin_triangle_deviation(h, side);
    const auto p = parallel::rtin_triangle_deviation(h, side);
    CHECK(s == p);
    CHECK(s.size() == rtin_parent_count(side));
    const auto errors = rtin_errors(h, side);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const RtinTriangle tri = rtin_triangle(i, side - 1);
      const int mx = (tri.ax + tri.bx) / 2, my = (tri.ay + tri.by) / 2;
      CHECK(errors[static_cast<std::size_t>(my) * side + mx] >= s[i]);
    }
  }
  CHECK(rtin_parent_count(3) == 6);
}

TEST_CASE("composite and colormap kernels agree") {
  std::mt19937_64 rng(419);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<RgbaImage> imgs(3, RgbaImage(64, 48));
  for (auto& img : imgs)
    for (auto& px : img.pixels) px = {u(rng), u(rng), u(rng), u(rng)};
  const CompositeLayer layers[] = {{&imgs[0], 1.0}, {&imgs[1], 0.7}, {&imgs[2], 0.3}};
  RgbaImage a(64, 48), b(64, 48);
  serial::composite(layers, a);
  parallel::composite(layers, b);
  CHECK(a.pixels == b.pixels);

  Colormap cm;
  cm.stops = {{0, {0, 0, 1, 0.2}}, {0.5, {0, 1, 0, 0.6}}, {1, {1, 0, 0, 1}}};
  std::vector<double> values(64 * 48);
  for (auto& v : values) v = u(rng) < 0.05 ? NAN : 1.2 * u(rng) - 0.1;
  RgbaImage c(64, 48), d(64, 48);
  serial::apply_colormap(values, cm, 0.8, c);
  parallel::apply_colormap(values, cm, 0.8, d);
  CHECK(c.pixels == d.pixels);
}

}  // TEST_SUITE
