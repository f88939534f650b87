#pragma once

#include <cmath>
#include <cstdint>

#include "citytwin/compositor.hpp"
#include "citytwin/terrain.hpp"

namespace citytwin::detail {

inline void encode_one(double v, std::uint8_t* px) {
  if (std::isnan(v)) {
    px[0] = kNodataRgb.r, px[1] = kNodataRgb.g, px[2] = kNodataRgb.b;
    return;
  }
  const Rgb c = encode_elevation(std::clamp(v, kMinElevation, kMaxElevation));
  px[0] = c.r, px[1] = c.g, px[2] = c.b;
}

inline double sample_pixel(const MergedTerrain& terrain, const TileId& t, int size, int px, int py) {
  const auto v = terrain.sample(pixel_center(t, size, px, py));
  return v ? *v : std::nan("");
}

inline Rgba with_opacity(Rgba c, double opacity) {
  c.a *= opacity;
  return c;
}

inline Rgba colormap_pixel(double value, const Colormap& cm, double opacity) {
  if (std::isnan(value)) return {};
  Rgba c = cm.lookup(value);
  c.a *= opacity;
  if (c.a <= 0.0) return {};
  return c;
}

}  // namespace citytwin::detail
