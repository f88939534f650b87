#include <random>

#include "citytwin/crs.hpp"
#include "test_util.hpp"

using namespace citytwin;

TEST_SUITE("crs") {

TEST_CASE("identity and unsupported systems") {
  const GeoPoint p = to_wgs84("EPSG:4326", 11.25, 43.77);
  CHECK(p == GeoPoint{11.25, 43.77});
  CHECK(is_supported_crs("EPSG:3003"));
  CHECK_FALSE(is_supported_crs("EPSG:32632"));
  CHECK_ERRC(to_wgs84("EPSG:32632", 0, 0), Errc::config);
}

TEST_CASE("Monte Mario zone 1 lands near Florence") {
  const Projected f = wgs84_to_epsg3003({11.2558, 43.7696});
  // 2.2558 deg east of the 9E central meridian, false easting 1500 km.
  CHECK(std::abs(f.easting - 1681500) < 2000);
  CHECK(std::abs(f.northing - 4848500) < 3000);
  // The datum shift is tens of metres, never kilometres.
  const GeoPoint back = to_wgs84("EPSG:3003", f.easting, f.northing);
  CHECK(haversine_m(back, {11.2558, 43.7696}) < 0.01);
}

TEST_CASE("property: round trip over the zone") {
  std::mt19937_64 rng(801);
  std::uniform_real_distribution<double> lon(6.5, 12.0), lat(36.5, 47.0);
  for (int i = 0; i < 2000; ++i) {
    const GeoPoint p{lon(rng), lat(rng)};
    CHECK(haversine_m(epsg3003_to_wgs84(wgs84_to_epsg3003(p)), p) < 0.01);
  }
}

}  // TEST_SUITE
