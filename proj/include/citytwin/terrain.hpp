#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "citytwin/geo.hpp"
#include "citytwin/tile_pyramid.hpp"

namespace citytwin {

// ---------------------------------------------------------------------------
// RGB elevation codec: 0.1 m steps offset by -10000 m, spread base-256 over
// three 8-bit channels.

inline constexpr double kMinElevation = -10000.0;
inline constexpr double kMaxElevation = 1667721.5;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Floor-quantised encoding. Throws Errc::range outside
/// [kMinElevation, kMaxElevation] or for non-finite input.
Rgb encode_elevation(double meters);
double decode_elevation(Rgb rgb);
/// The 24-bit integer carried by the three channels.
inline std::uint32_t packed(Rgb c) { return (std::uint32_t(c.r) << 16) | (std::uint32_t(c.g) << 8) | c.b; }

/// Sentinel written for pixels with no data; decodes to kMinElevation.
inline constexpr Rgb kNodataRgb{0, 0, 0};

// ---------------------------------------------------------------------------

/// Single-band raster georeferenced in WGS84 degrees. Samples are points:
/// sample (i, j) sits at (west + i*dx, north - j*dy), rows run north to south.
struct ElevationGrid {
  int width = 0;
  int height = 0;
  double west = 0.0;
  double north = 0.0;
  double dx = 1.0;  ///< degrees per column
  double dy = 1.0;  ///< degrees per row
  std::vector<float> values;
  float nodata = -9999.0f;
  int priority = 0;

  float at(int i, int j) const { return values[static_cast<std::size_t>(j) * width + i]; }
  float& at(int i, int j) { return values[static_cast<std::size_t>(j) * width + i]; }
  bool is_nodata(float v) const { return !std::isfinite(v) || v == nodata; }
  GeoPoint position(int i, int j) const { return {west + i * dx, north - j * dy}; }
  GeoBBox bbox() const { return {west, north - (height - 1) * dy, west + (width - 1) * dx, north}; }
  /// Mean ground spacing of one sample, metres.
  double resolution_m() const;

  /// Bilinear interpolation; nullopt outside the grid or when any of the four
  /// surrounding samples is nodata.
  std::optional<double> sample(const GeoPoint& p) const;

  /// Throws Errc::validation on inconsistent dimensions or spacing.
  void validate() const;
};

/// Several grids queried as one surface: at each point the highest-priority
/// grid with data wins, earlier registration breaks priority ties.
class MergedTerrain {
 public:
  MergedTerrain() = default;
  explicit MergedTerrain(std::vector<ElevationGrid> grids);

  void add(ElevationGrid grid);
  std::optional<double> sample(const GeoPoint& p) const;
  bool overlaps(const GeoBBox& box) const;
  bool empty() const { return grids_.empty(); }
  const std::vector<ElevationGrid>& grids() const { return grids_; }

 private:
  std::vector<ElevationGrid> grids_;  // registration order
  std::vector<std::size_t> order_;    // query order
};

/// 8-bit RGB raster, row-major, no alpha.
struct RgbTile {
  int size = 256;
  std::vector<std::uint8_t> rgb;  // size*size*3

  Rgb pixel(int px, int py) const {
    const std::size_t o = (static_cast<std::size_t>(py) * size + px) * 3;
    return {rgb[o], rgb[o + 1], rgb[o + 2]};
  }
};

/// Geographic position of the centre of pixel (px, py) of a tile raster.
GeoPoint pixel_center(const TileId& t, int size, int px, int py);

/// Samples the merged terrain at every pixel centre of `t` and encodes it.
/// Throws Errc::empty_tile when no grid overlaps the tile.
RgbTile encode_tile(const MergedTerrain& terrain, const TileId& t, int size = 256);

// ---------------------------------------------------------------------------
// RTIN tessellation

struct TerrainMesh {
  std::vector<Vec3> vertices;  // lon, lat, elevation
  std::vector<std::array<std::uint32_t, 3>> triangles;
  double max_error = 0.0;
};

/// Right-triangulated irregular network over a (2^k+1)^2 grid. Splits every
/// triangle whose surface deviates from some enclosed sample by more than
/// `max_error`; max_error <= 0 yields the full-resolution mesh. Throws
/// Errc::shape for other grid sizes.
TerrainMesh tessellate(const ElevationGrid& grid, double max_error);

/// Pads to the next (2^k+1)^2 square by replicating the last row/column.
ElevationGrid pad_for_tessellation(const ElevationGrid& grid);

/// Per-midpoint RTIN error table for a square (2^k+1)^2 height array, laid out
/// like the heights. Entry m holds the largest deviation of any sample inside
/// the triangles hinged on midpoint m, maxed with their descendants.
std::vector<double> rtin_errors(std::span<const float> heights, int side);

// ---------------------------------------------------------------------------
// Raster files

/// ESRI ASCII grid (xllcorner/xllcenter variants, NODATA_value optional).
ElevationGrid read_ascii_grid(const std::filesystem::path& path);
void write_ascii_grid(const std::filesystem::path& path, const ElevationGrid& grid);

/// Little-endian binary grid: "CTGRID1\0", u32 width, u32 height, f64 west,
/// f64 north, f64 dx, f64 dy, f32 nodata, i32 priority, then width*height f32.
ElevationGrid read_binary_grid(const std::filesystem::path& path);
void write_binary_grid(const std::filesystem::path& path, const ElevationGrid& grid);

/// Chooses the reader by extension: .asc -> ASCII, anything else -> binary.
ElevationGrid read_grid(const std::filesystem::path& path);

}  // namespace citytwin
