#pragma once

#include "citytwin/timeutil.hpp"

namespace citytwin {

struct SunPosition {
  double azimuth_deg = 0.0;    ///< clockwise from north, [0, 360)
  double elevation_deg = 0.0;  ///< above the horizon, no refraction
};

/// Low-precision solar ephemeris (mean longitude and anomaly, two-term
/// equation of centre, mean obliquity, GMST), good to about 0.01 degree for
/// 1950-2050.
SunPosition sun_position(double lat_deg, double lon_deg, TimestampMs utc);

/// Julian date of a Unix millisecond timestamp.
double julian_date(TimestampMs utc);

}  // namespace citytwin
