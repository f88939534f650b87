#include "citytwin/compositor.hpp"

#include <algorithm>
#include <cmath>

#include "citytwin/error.hpp"
#include "citytwin/kernels.hpp"

namespace citytwin {

Rgba blend_pixel(const Rgba& background, const Rgba& additive) {
  const double a1 = background.a;
  const double a2 = additive.a;
  // Keep the transparent and opaque cases bit-exact.
  if (a2 <= 0.0) return a1 > 0.0 ? background : Rgba{};
  if (a2 >= 1.0) return additive;
  const double mix_a = 1.0 - (1.0 - a2) * (1.0 - a1);
  if (mix_a <= 0.0) return {};
  const double w2 = a2 / mix_a;
  const double w1 = a1 * (1.0 - a2) / mix_a;
  return {additive.r * w2 + background.r * w1, additive.g * w2 + background.g * w1,
          additive.b * w2 + background.b * w1, mix_a};
}

RgbaImage composite(std::span<const CompositeLayer> layers) {
  if (layers.empty()) throw Error(Errc::validation, "composite needs at least one layer");
  const int w = layers[0].image->width;
  const int h = layers[0].image->height;
  for (const auto& l : layers) {
    if (l.image->width != w || l.image->height != h)
      throw Error(Errc::shape, "layer dimensions differ");
    if (!(l.opacity >= 0.0 && l.opacity <= 1.0)) throw Error(Errc::range, "layer opacity outside [0, 1]");
  }
  RgbaImage out(w, h);
  parallel::composite(layers, out);
  return out;
}

void Colormap::validate() const {
  if (stops.empty()) throw Error(Errc::config, "colormap has no stops");
  for (std::size_t i = 1; i < stops.size(); ++i)
    if (!(stops[i].value > stops[i - 1].value))
      throw Error(Errc::config, "colormap stops must be strictly increasing");
}

Rgba Colormap::lookup(double value) const {
  if (value <= stops.front().value) return stops.front().color;
  if (value >= stops.back().value) return stops.back().color;
  const auto hi = std::upper_bound(stops.begin(), stops.end(), value,
                                   [](double v, const ColorStop& s) { return v < s.value; });
  const auto lo = hi - 1;
  const double t = (value - lo->value) / (hi->value - lo->value);
  if (mode == ColormapInterpolation::nearest) return t < 0.5 ? lo->color : hi->color;
  const Rgba& a = lo->color;
  const Rgba& b = hi->color;
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t, a.a + (b.a - a.a) * t};
}

Rgba parse_hex_color(const std::string& hex) {
  if ((hex.size() != 7 && hex.size() != 9) || hex[0] != '#')
    throw Error(Errc::config, "colour must be #rrggbb or #rrggbbaa: " + hex);
  auto channel = [&](std::size_t at) {
    std::size_t used = 0;
    const int v = std::stoi(hex.substr(at, 2), &used, 16);
    if (used != 2) throw Error(Errc::config, "bad hex colour: " + hex);
    return v / 255.0;
  };
  try {
    return {channel(1), channel(3), channel(5), hex.size() == 9 ? channel(7) : 1.0};
  } catch (const std::invalid_argument&) {
    throw Error(Errc::config, "bad hex colour: " + hex);
  }
}

RgbaImage apply_colormap(std::span<const double> values, int width, int height, const Colormap& cm,
                         double opacity) {
  cm.validate();
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw Error(Errc::shape, "raster size does not match dimensions");
  RgbaImage out(width, height);
  parallel::apply_colormap(values, cm, std::clamp(opacity, 0.0, 1.0), out);
  return out;
}

std::vector<std::uint8_t> to_rgba8(const RgbaImage& image) {
  std::vector<std::uint8_t> out(image.pixels.size() * 4);
  auto q = [](double c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); };
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const auto& p = image.pixels[i];
    out[4 * i] = q(p.r);
    out[4 * i + 1] = q(p.g);
    out[4 * i + 2] = q(p.b);
    out[4 * i + 3] = q(p.a);
  }
  return out;
}

}  // namespace citytwin
