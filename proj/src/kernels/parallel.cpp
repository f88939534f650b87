#include <omp.h>

#include <cmath>

#include "citytwin/kernels.hpp"
#include "kernel_common.hpp"

namespace citytwin::parallel {

void sample_tile(const MergedTerrain& terrain, const TileId& t, int size, std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (int py = 0; py < size; ++py)
    for (int px = 0; px < size; ++px)
      out[static_cast<std::size_t>(py) * size + px] = detail::sample_pixel(terrain, t, size, px, py);
}

void encode_raster(std::span<const double> elevations, std::span<std::uint8_t> rgb) {
  const auto n = static_cast<std::ptrdiff_t>(elevations.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) detail::encode_one(elevations[i], &rgb[3 * i]);
}

std::vector<double> rtin_triangle_deviation(std::span<const float> heights, int side) {
  const auto n = static_cast<std::ptrdiff_t>(rtin_parent_count(side));
  std::vector<double> dev(static_cast<std::size_t>(n));
  // Coarse triangles cover far more samples than fine ones.
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    dev[i] = rtin_deviation(heights, side, rtin_triangle(static_cast<std::size_t>(i), side - 1));
  return dev;
}

void composite(std::span<const CompositeLayer> layers, RgbaImage& out) {
  const auto n = static_cast<std::ptrdiff_t>(out.pixels.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    Rgba acc = detail::with_opacity(layers[0].image->pixels[i], layers[0].opacity);
    for (std::size_t l = 1; l < layers.size(); ++l)
      acc = blend_pixel(acc, detail::with_opacity(layers[l].image->pixels[i], layers[l].opacity));
    out.pixels[i] = acc;
  }
}

void apply_colormap(std::span<const double> values, const Colormap& cm, double opacity, RgbaImage& out) {
  const auto n = static_cast<std::ptrdiff_t>(values.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out.pixels[i] = detail::colormap_pixel(values[i], cm, opacity);
}

}  // namespace citytwin::parallel
