#include "citytwin/sun.hpp"

#include <cmath>

#include "citytwin/geo.hpp"

namespace citytwin {

double julian_date(TimestampMs utc) { return static_cast<double>(utc) / 86400000.0 + 2440587.5; }

SunPosition sun_position(double lat_deg, double lon_deg, TimestampMs utc) {
  const double n = julian_date(utc) - 2451545.0;

  const double L = std::fmod(280.460 + 0.9856474 * n, 360.0);
  const double g = deg2rad(std::fmod(357.528 + 0.9856003 * n, 360.0));
  const double lambda = deg2rad(L + 1.915 * std::sin(g) + 0.020 * std::sin(2 * g));
  const double eps = deg2rad(23.439 - 0.0000004 * n);

  const double ra = std::atan2(std::cos(eps) * std::sin(lambda), std::cos(lambda));
  const double dec = std::asin(std::sin(eps) * std::sin(lambda));

  const double gmst_h = std::fmod(18.697374558 + 24.06570982441908 * n, 24.0);
  const double H = deg2rad(gmst_h * 15.0 + lon_deg) - ra;
  const double phi = deg2rad(lat_deg);

  const double alt = std::asin(std::sin(phi) * std::sin(dec) + std::cos(phi) * std::cos(dec) * std::cos(H));
  // Measured from the south, positive westward; shift to north-based.
  const double from_south = std::atan2(std::sin(H), std::cos(H) * std::sin(phi) - std::tan(dec) * std::cos(phi));
  double az = std::fmod(rad2deg(from_south) + 180.0, 360.0);
  if (az < 0) az += 360.0;
  if (az >= 360.0) az -= 360.0;
  return {az, rad2deg(alt)};
}

}  // namespace citytwin
