#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace citytwin {

/// Straight (non-premultiplied) colour, every channel in [0, 1].
struct Rgba {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  double a = 0.0;

  friend bool operator==(const Rgba&, const Rgba&) = default;
};

/// Places `additive` over `background`:
///   a   = 1 - (1 - a2)(1 - a1)
///   C   = (C2 a2 + C1 a1 (1 - a2)) / a
/// Fully transparent results are transparent black.
Rgba blend_pixel(const Rgba& background, const Rgba& additive);

struct RgbaImage {
  int width = 0;
  int height = 0;
  std::vector<Rgba> pixels;  // row-major

  RgbaImage() = default;
  RgbaImage(int w, int h, Rgba fill = {}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  Rgba& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const Rgba& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct CompositeLayer {
  const RgbaImage* image = nullptr;
  double opacity = 1.0;
};

/// Bottom-to-top fold of blend_pixel with each layer's alpha scaled by its
/// opacity. Throws Errc::shape on size mismatch, Errc::validation on an
/// empty stack.
RgbaImage composite(std::span<const CompositeLayer> layers);

enum class ColormapInterpolation { linear, nearest };

struct ColorStop {
  double value = 0.0;
  Rgba color;
};

struct Colormap {
  std::vector<ColorStop> stops;  // strictly increasing values
  ColormapInterpolation mode = ColormapInterpolation::linear;

  /// Throws Errc::config when empty or not strictly increasing.
  void validate() const;
  /// Values beyond the end stops take the end colours.
  Rgba lookup(double value) const;
};

/// Parses "#rrggbb" or "#rrggbbaa".
Rgba parse_hex_color(const std::string& hex);

/// Throws Errc::config for an invalid colormap, Errc::shape when
/// values.size() != width*height. NaN values become transparent.
RgbaImage apply_colormap(std::span<const double> values, int width, int height, const Colormap& cm,
                         double opacity);

/// 8-bit RGBA, row-major, rounded to nearest.
std::vector<std::uint8_t> to_rgba8(const RgbaImage& image);

}  // namespace citytwin
