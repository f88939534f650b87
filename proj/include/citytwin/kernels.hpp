#pragma once

// Data-parallel hot loops. Every kernel exists twice with identical
// signatures: `serial` is the plain reference kept for tests, `parallel` is
// the OpenMP version the library calls. Both produce bit-identical output.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "citytwin/tile_pyramid.hpp"

namespace citytwin {

class MergedTerrain;
struct RgbaImage;
struct Colormap;
struct CompositeLayer;

namespace serial {

/// Merged-terrain value at every pixel centre of a size*size tile; NaN marks nodata.
void sample_tile(const MergedTerrain& terrain, const TileId& t, int size, std::span<double> out);
/// RGB-encodes elevations (NaN -> nodata sentinel), clamped to the codec range.
void encode_raster(std::span<const double> elevations, std::span<std::uint8_t> rgb);
/// Largest |height - plane| over the samples of each RTIN parent triangle.
std::vector<double> rtin_triangle_deviation(std::span<const float> heights, int side);
/// Left fold of blend_pixel over the layers, bottom first.
void composite(std::span<const CompositeLayer> layers, RgbaImage& out);
/// Colormap lookup per value; NaN -> transparent; opacity scales alpha.
void apply_colormap(std::span<const double> values, const Colormap& cm, double opacity, RgbaImage& out);

}  // namespace serial

namespace parallel {

void sample_tile(const MergedTerrain& terrain, const TileId& t, int size, std::span<double> out);
void encode_raster(std::span<const double> elevations, std::span<std::uint8_t> rgb);
std::vector<double> rtin_triangle_deviation(std::span<const float> heights, int side);
void composite(std::span<const CompositeLayer> layers, RgbaImage& out);
void apply_colormap(std::span<const double> values, const Colormap& cm, double opacity, RgbaImage& out);

}  // namespace parallel

/// Number of splittable triangles in the RTIN hierarchy of a grid with
/// 2^k+1 samples per side.
std::size_t rtin_parent_count(int side);

/// Corners of RTIN triangle `index`: a-b is the hypotenuse, c the right angle.
struct RtinTriangle {
  int ax, ay, bx, by, cx, cy;
};
RtinTriangle rtin_triangle(std::size_t index, int tile_size);

/// Max |h - plane(a,b,c)| over grid samples in the closed triangle.
double rtin_deviation(std::span<const float> heights, int side, const RtinTriangle& tri);

}  // namespace citytwin
