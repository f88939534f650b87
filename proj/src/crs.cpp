#include "citytwin/crs.hpp"

#include <cmath>

#include "citytwin/error.hpp"

namespace citytwin {

namespace {

struct Ellipsoid {
  double a;
  double f;
  double e2() const { return f * (2 - f); }
};

constexpr Ellipsoid kIntl1924{6378388.0, 1.0 / 297.0};
constexpr Ellipsoid kWgs84{6378137.0, 1.0 / 298.257223563};

constexpr double kK0 = 0.9996;
constexpr double kLon0 = 9.0;
constexpr double kFalseEasting = 1500000.0;

// Position-vector convention, rotations in arc seconds, scale in ppm.
constexpr double kTx = -104.1, kTy = -49.1, kTz = -9.9;
constexpr double kRx = 0.971, kRy = -2.917, kRz = 0.714;
constexpr double kPpm = -11.68;

double meridian_arc(const Ellipsoid& el, double phi) {
  const double e2 = el.e2(), e4 = e2 * e2, e6 = e4 * e2;
  return el.a * ((1 - e2 / 4 - 3 * e4 / 64 - 5 * e6 / 256) * phi - (3 * e2 / 8 + 3 * e4 / 32 + 45 * e6 / 1024) * std::sin(2 * phi) +
                 (15 * e4 / 256 + 45 * e6 / 1024) * std::sin(4 * phi) - (35 * e6 / 3072) * std::sin(6 * phi));
}

GeoPoint tm_inverse(const Ellipsoid& el, double E, double N) {
  const double e2 = el.e2(), e4 = e2 * e2, e6 = e4 * e2;
  const double ep2 = e2 / (1 - e2);
  const double M = N / kK0;
  const double mu = M / (el.a * (1 - e2 / 4 - 3 * e4 / 64 - 5 * e6 / 256));
  const double e1 = (1 - std::sqrt(1 - e2)) / (1 + std::sqrt(1 - e2));
  const double phi1 = mu + (3 * e1 / 2 - 27 * std::pow(e1, 3) / 32) * std::sin(2 * mu) +
                      (21 * e1 * e1 / 16 - 55 * std::pow(e1, 4) / 32) * std::sin(4 * mu) +
                      (151 * std::pow(e1, 3) / 96) * std::sin(6 * mu) + (1097 * std::pow(e1, 4) / 512) * std::sin(8 * mu);
  const double s = std::sin(phi1), c = std::cos(phi1), t = std::tan(phi1);
  const double C1 = ep2 * c * c;
  const double T1 = t * t;
  const double N1 = el.a / std::sqrt(1 - e2 * s * s);
  const double R1 = el.a * (1 - e2) / std::pow(1 - e2 * s * s, 1.5);
  const double D = (E - kFalseEasting) / (N1 * kK0);
  const double phi =
      phi1 - (N1 * t / R1) * (D * D / 2 - (5 + 3 * T1 + 10 * C1 - 4 * C1 * C1 - 9 * ep2) * std::pow(D, 4) / 24 +
                              (61 + 90 * T1 + 298 * C1 + 45 * T1 * T1 - 252 * ep2 - 3 * C1 * C1) * std::pow(D, 6) / 720);
  const double lam = (D - (1 + 2 * T1 + C1) * std::pow(D, 3) / 6 +
                      (5 - 2 * C1 + 28 * T1 - 3 * C1 * C1 + 8 * ep2 + 24 * T1 * T1) * std::pow(D, 5) / 120) /
                     c;
  return {kLon0 + rad2deg(lam), rad2deg(phi)};
}

Projected tm_forward(const Ellipsoid& el, const GeoPoint& g) {
  const double e2 = el.e2();
  const double ep2 = e2 / (1 - e2);
  const double phi = deg2rad(g.lat);
  const double s = std::sin(phi), c = std::cos(phi), t = std::tan(phi);
  const double N = el.a / std::sqrt(1 - e2 * s * s);
  const double T = t * t;
  const double C = ep2 * c * c;
  const double A = deg2rad(g.lon - kLon0) * c;
  const double M = meridian_arc(el, phi);
  const double x = kK0 * N *
                   (A + (1 - T + C) * std::pow(A, 3) / 6 + (5 - 18 * T + T * T + 72 * C - 58 * ep2) * std::pow(A, 5) / 120);
  const double y = kK0 * (M + N * t *
                                  (A * A / 2 + (5 - T + 9 * C + 4 * C * C) * std::pow(A, 4) / 24 +
                                   (61 - 58 * T + T * T + 600 * C - 330 * ep2) * std::pow(A, 6) / 720));
  return {x + kFalseEasting, y};
}

struct Xyz {
  double x, y, z;
};

Xyz to_ecef(const Ellipsoid& el, const GeoPoint& g) {
  const double phi = deg2rad(g.lat), lam = deg2rad(g.lon);
  const double N = el.a / std::sqrt(1 - el.e2() * std::sin(phi) * std::sin(phi));
  return {N * std::cos(phi) * std::cos(lam), N * std::cos(phi) * std::sin(lam), N * (1 - el.e2()) * std::sin(phi)};
}

GeoPoint from_ecef(const Ellipsoid& el, const Xyz& p) {
  const double e2 = el.e2();
  const double r = std::hypot(p.x, p.y);
  double phi = std::atan2(p.z, r * (1 - e2));
  for (int i = 0; i < 10; ++i) {
    const double N = el.a / std::sqrt(1 - e2 * std::sin(phi) * std::sin(phi));
    const double h = r / std::cos(phi) - N;
    phi = std::atan2(p.z, r * (1 - e2 * N / (N + h)));
  }
  return {rad2deg(std::atan2(p.y, p.x)), rad2deg(phi)};
}

Xyz helmert(const Xyz& p, double sign) {
  const double k = deg2rad(1.0 / 3600.0);
  const double rx = sign * kRx * k, ry = sign * kRy * k, rz = sign * kRz * k;
  const double m = 1 + sign * kPpm * 1e-6;
  return {sign * kTx + m * (p.x - rz * p.y + ry * p.z), sign * kTy + m * (rz * p.x + p.y - rx * p.z),
          sign * kTz + m * (-ry * p.x + rx * p.y + p.z)};
}

}  // namespace

GeoPoint epsg3003_to_wgs84(const Projected& p) {
  const GeoPoint local = tm_inverse(kIntl1924, p.easting, p.northing);
  return from_ecef(kWgs84, helmert(to_ecef(kIntl1924, local), 1.0));
}

Projected wgs84_to_epsg3003(const GeoPoint& p) {
  // The small-angle shift is inverted by negating its parameters.
  const GeoPoint local = from_ecef(kIntl1924, helmert(to_ecef(kWgs84, p), -1.0));
  return tm_forward(kIntl1924, local);
}

bool is_supported_crs(const std::string& crs) { return crs == "EPSG:4326" || crs == "EPSG:3003"; }

GeoPoint to_wgs84(const std::string& crs, double x, double y) {
  if (crs == "EPSG:4326") return {x, y};
  if (crs == "EPSG:3003") return epsg3003_to_wgs84({x, y});
  throw Error(Errc::config, "unsupported coordinate system " + crs);
}

}  // namespace citytwin
