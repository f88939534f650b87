#pragma once

// Reference implementations used only by the tests. Each is written from the
// textbook definition, not from the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

constexpr double kPi = 3.14159265358979323846;
inline double rad(double d) { return d * kPi / 180.0; }
inline double deg(double r) { return r * 180.0 / kPi; }

// ---------------------------------------------------------------------------
// Slippy tiles

inline std::pair<long long, long long> slippy(double lon, double lat, int z) {
  const double n = std::ldexp(1.0, z);
  const double phi = rad(lat);
  auto x = static_cast<long long>(std::floor((lon + 180.0) / 360.0 * n));
  auto y = static_cast<long long>(std::floor((1.0 - std::log(std::tan(phi) + 1.0 / std::cos(phi)) / kPi) / 2.0 * n));
  const long long hi = static_cast<long long>(n) - 1;
  return {std::clamp(x, 0LL, hi), std::clamp(y, 0LL, hi)};
}

inline double tile_lat(long long y, int z) {
  const double n = kPi - 2.0 * kPi * static_cast<double>(y) / std::ldexp(1.0, z);
  return deg(std::atan(std::sinh(n)));
}

// ---------------------------------------------------------------------------
// Elevation codec from the printed equations, integer arithmetic only

struct Rgb {
  int r, g, b;
};

/// Tenths of a metre in, channels out: N = 100000 + tenths.
inline Rgb encode_tenths(long long tenths) {
  const long long n = 100000 + tenths;
  const long long r = n / (256 * 256);
  const long long g = n / 256 - 256 * r;
  const long long b = n - 256 * 256 * r - 256 * g;
  return {static_cast<int>(r), static_cast<int>(g), static_cast<int>(b)};
}

inline double decode(int r, int g, int b) { return (r * 65536.0 + g * 256.0 + b - 100000.0) / 10.0; }

// ---------------------------------------------------------------------------
// Porter-Duff source-over on premultiplied colour

struct Px {
  double r, g, b, a;
};

inline Px source_over(const Px& dst, const Px& src) {
  const double pr = src.r * src.a + dst.r * dst.a * (1 - src.a);
  const double pg = src.g * src.a + dst.g * dst.a * (1 - src.a);
  const double pb = src.b * src.a + dst.b * dst.a * (1 - src.a);
  const double a = src.a + dst.a * (1 - src.a);
  if (a <= 0) return {0, 0, 0, 0};
  return {pr / a, pg / a, pb / a, a};
}

// ---------------------------------------------------------------------------
// Planar geometry

/// Shoelace area of an open ring (absolute value).
inline double shoelace(const std::vector<std::pair<double, double>>& ring) {
  double s = 0;
  for (std::size_t i = 0, n = ring.size(); i < n; ++i) {
    const auto& [x1, y1] = ring[i];
    const auto& [x2, y2] = ring[(i + 1) % n];
    s += x1 * y2 - x2 * y1;
  }
  return std::abs(s) / 2;
}

inline std::pair<double, double> shoelace_centroid(const std::vector<std::pair<double, double>>& ring) {
  double a = 0, cx = 0, cy = 0;
  for (std::size_t i = 0, n = ring.size(); i < n; ++i) {
    const auto& [x1, y1] = ring[i];
    const auto& [x2, y2] = ring[(i + 1) % n];
    const double c = x1 * y2 - x2 * y1;
    a += c;
    cx += (x1 + x2) * c;
    cy += (y1 + y2) * c;
  }
  return {cx / (3 * a), cy / (3 * a)};
}

/// Even-odd ray cast.
inline bool inside(const std::vector<std::pair<double, double>>& ring, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const auto& [xi, yi] = ring[i];
    const auto& [xj, yj] = ring[j];
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
  }
  return in;
}

// ---------------------------------------------------------------------------
// Bilinear interpolation on a row-major grid, rows north to south

inline std::optional<double> bilinear(const std::vector<float>& v, int w, int h, double west, double north, double dx,
                                      double dy, double nodata, double lon, double lat) {
  const double fx = (lon - west) / dx;
  const double fy = (north - lat) / dy;
  if (fx < 0 || fy < 0 || fx > w - 1 || fy > h - 1) return std::nullopt;
  int i = static_cast<int>(fx), j = static_cast<int>(fy);
  if (i == w - 1) --i;
  if (j == h - 1) --j;
  const double tx = fx - i, ty = fy - j;
  const double a = v[j * w + i], b = v[j * w + i + 1], c = v[(j + 1) * w + i], d = v[(j + 1) * w + i + 1];
  for (double q : {a, b, c, d})
    if (q == nodata || !std::isfinite(q)) return std::nullopt;
  const double top = a * (1 - tx) + b * tx;
  const double bottom = c * (1 - tx) + d * tx;
  return top * (1 - ty) + bottom * ty;
}

// ---------------------------------------------------------------------------
// Shortest paths by Bellman-Ford relaxation

struct Arc {
  int from, to;
  double cost;
};

inline std::vector<double> bellman_ford(int n, const std::vector<Arc>& arcs, int source) {
  std::vector<double> d(n, std::numeric_limits<double>::infinity());
  d[source] = 0;
  for (int round = 0; round < n - 1; ++round) {
    bool changed = false;
    for (const auto& a : arcs)
      if (d[a.from] + a.cost < d[a.to]) {
        d[a.to] = d[a.from] + a.cost;
        changed = true;
      }
    if (!changed) break;
  }
  return d;
}

// ---------------------------------------------------------------------------
// NOAA solar calculator (spreadsheet formulation: equation of time and true
// solar time), without atmospheric refraction.

struct Sun {
  double azimuth, elevation;
};

inline Sun noaa_sun(double lat, double lon, double jd) {
  const double T = (jd - 2451545.0) / 36525.0;
  const double L0 = std::fmod(280.46646 + T * (36000.76983 + T * 0.0003032), 360.0);
  const double M = 357.52911 + T * (35999.05029 - 0.0001537 * T);
  const double e = 0.016708634 - T * (0.000042037 + 0.0000001267 * T);
  const double Mr = rad(M);
  const double C = std::sin(Mr) * (1.914602 - T * (0.004817 + 0.000014 * T)) +
                   std::sin(2 * Mr) * (0.019993 - 0.000101 * T) + std::sin(3 * Mr) * 0.000289;
  const double omega = 125.04 - 1934.136 * T;
  const double app = L0 + C - 0.00569 - 0.00478 * std::sin(rad(omega));
  const double eps0 = 23.0 + (26.0 + (21.448 - T * (46.815 + T * (0.00059 - T * 0.001813))) / 60.0) / 60.0;
  const double eps = eps0 + 0.00256 * std::cos(rad(omega));
  const double dec = std::asin(std::sin(rad(eps)) * std::sin(rad(app)));
  const double y = std::pow(std::tan(rad(eps / 2)), 2);
  const double L0r = rad(L0);
  const double eot = 4 * deg(y * std::sin(2 * L0r) - 2 * e * std::sin(Mr) + 4 * e * y * std::sin(Mr) * std::cos(2 * L0r) -
                             0.5 * y * y * std::sin(4 * L0r) - 1.25 * e * e * std::sin(2 * Mr));
  const double minutes = std::fmod(jd + 0.5, 1.0) * 1440.0;
  const double tst = std::fmod(minutes + eot + 4 * lon + 1440.0 * 4, 1440.0);
  const double ha = rad(tst / 4 - 180);
  const double phi = rad(lat);
  const double cz = std::clamp(std::sin(phi) * std::sin(dec) + std::cos(phi) * std::cos(dec) * std::cos(ha), -1.0, 1.0);
  const double el = deg(std::asin(cz));
  double az = deg(std::atan2(std::sin(ha), std::cos(ha) * std::sin(phi) - std::tan(dec) * std::cos(phi))) + 180.0;
  az = std::fmod(az, 360.0);
  return {az, el};
}

/// Angle between two sky directions, degrees.
inline double separation(double az1, double el1, double az2, double el2) {
  auto v = [](double az, double el) {
    return std::tuple{std::cos(rad(el)) * std::sin(rad(az)), std::cos(rad(el)) * std::cos(rad(az)), std::sin(rad(el))};
  };
  const auto [x1, y1, z1] = v(az1, el1);
  const auto [x2, y2, z2] = v(az2, el2);
  return deg(std::acos(std::clamp(x1 * x2 + y1 * y2 + z1 * z2, -1.0, 1.0)));
}

}  // namespace oracle
