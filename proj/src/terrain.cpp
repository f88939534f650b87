#include "citytwin/terrain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "citytwin/error.hpp"
#include "citytwin/kernels.hpp"

namespace citytwin {

// ---------------------------------------------------------------------------
// Codec

namespace {
constexpr double kOffset = 100000.0;
constexpr std::int64_t kMaxPacked = (std::int64_t{1} << 24) - 1;

double decode_packed(std::int64_t n) { return (static_cast<double>(n) - kOffset) / 10.0; }
}  // namespace

Rgb encode_elevation(double meters) {
  if (!std::isfinite(meters) || meters < kMinElevation || meters > kMaxElevation)
    throw Error(Errc::range, "elevation outside encodable range: " + std::to_string(meters));
  // floor(100000 + 10v), nudged so that the decoded value never exceeds v and
  // the next code up always does (guards the rounding of 10v in binary).
  auto n = static_cast<std::int64_t>(std::floor(kOffset + 10.0 * meters));
  while (n > 0 && decode_packed(n) > meters) --n;
  while (n < kMaxPacked && decode_packed(n + 1) <= meters) ++n;
  n = std::clamp<std::int64_t>(n, 0, kMaxPacked);
  const auto r = n / 65536;
  const auto g = n / 256 - 256 * r;
  const auto b = n - 65536 * r - 256 * g;
  return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
}

double decode_elevation(Rgb c) { return decode_packed(packed(c)); }

// ---------------------------------------------------------------------------
// Grids

double ElevationGrid::resolution_m() const {
  const double lat = north - (height - 1) * dy / 2.0;
  const double mx = deg2rad(dx) * kEarthRadiusM * std::cos(deg2rad(lat));
  const double my = deg2rad(dy) * kEarthRadiusM;
  return (mx + my) / 2.0;
}

void ElevationGrid::validate() const {
  if (width < 2 || height < 2) throw Error(Errc::validation, "grid needs at least 2x2 samples");
  if (!(dx > 0) || !(dy > 0)) throw Error(Errc::validation, "grid resolution must be positive");
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw Error(Errc::validation, "grid payload does not match its dimensions");
  if (!std::isfinite(west) || !std::isfinite(north)) throw Error(Errc::validation, "grid origin not finite");
  for (float v : values)
    if (!is_nodata(v) && (v < kMinElevation || v > kMaxElevation))
      throw Error(Errc::validation, "grid value outside encodable range");
}

std::optional<double> ElevationGrid::sample(const GeoPoint& p) const {
  const double fx = (p.lon - west) / dx;
  const double fy = (north - p.lat) / dy;
  if (!(fx >= 0.0 && fy >= 0.0 && fx <= width - 1 && fy <= height - 1)) return std::nullopt;
  const int i = std::min(static_cast<int>(fx), width - 2);
  const int j = std::min(static_cast<int>(fy), height - 2);
  const double tx = fx - i;
  const double ty = fy - j;
  const float v00 = at(i, j), v10 = at(i + 1, j), v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
  if (is_nodata(v00) || is_nodata(v10) || is_nodata(v01) || is_nodata(v11)) return std::nullopt;
  const double top = v00 + (v10 - static_cast<double>(v00)) * tx;
  const double bottom = v01 + (v11 - static_cast<double>(v01)) * tx;
  return top + (bottom - top) * ty;
}

MergedTerrain::MergedTerrain(std::vector<ElevationGrid> grids) {
  for (auto& g : grids) add(std::move(g));
}

void MergedTerrain::add(ElevationGrid grid) {
  grid.validate();
  grids_.push_back(std::move(grid));
  order_.resize(grids_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return grids_[a].priority > grids_[b].priority; });
}

std::optional<double> MergedTerrain::sample(const GeoPoint& p) const {
  for (std::size_t idx : order_)
    if (auto v = grids_[idx].sample(p)) return v;
  return std::nullopt;
}

bool MergedTerrain::overlaps(const GeoBBox& box) const {
  return std::any_of(grids_.begin(), grids_.end(), [&](const ElevationGrid& g) { return g.bbox().intersects(box); });
}

GeoPoint pixel_center(const TileId& t, int size, int px, int py) {
  const double n = std::ldexp(1.0, t.z);
  const double u = (t.x + (px + 0.5) / size) / n;
  const double v = (t.y + (py + 0.5) / size) / n;
  return {unit_to_lon(u), unit_to_lat(v)};
}

RgbTile encode_tile(const MergedTerrain& terrain, const TileId& t, int size) {
  if (size < 1) throw Error(Errc::range, "tile size must be positive");
  if (!terrain.overlaps(tile_bounds(t))) throw Error(Errc::empty_tile, "no terrain covers tile " + t.to_string());
  std::vector<double> elevations(static_cast<std::size_t>(size) * size);
  parallel::sample_tile(terrain, t, size, elevations);
  RgbTile tile;
  tile.size = size;
  tile.rgb.resize(elevations.size() * 3);
  parallel::encode_raster(elevations, tile.rgb);
  return tile;
}

// ---------------------------------------------------------------------------
// RTIN

namespace {
bool is_rtin_side(int side) { return side >= 3 && std::has_single_bit(static_cast<unsigned>(side - 1)); }
}  // namespace

std::vector<double> rtin_errors(std::span<const float> heights, int side) {
  if (!is_rtin_side(side) || heights.size() != static_cast<std::size_t>(side) * side)
    throw Error(Errc::shape, "RTIN grids must be (2^k+1)^2, got side " + std::to_string(side));
  const int tile = side - 1;
  const std::size_t count = rtin_parent_count(side);
  const std::size_t with_grandchildren = count - static_cast<std::size_t>(tile) * tile;
  const auto deviation = parallel::rtin_triangle_deviation(heights, side);

  std::vector<double> errors(heights.size(), 0.0);
  // Finest triangles first so every midpoint sees its descendants' errors.
  for (std::size_t k = count; k-- > 0;) {
    const auto t = rtin_triangle(k, tile);
    const std::size_t m = static_cast<std::size_t>((t.ay + t.by) >> 1) * side + ((t.ax + t.bx) >> 1);
    errors[m] = std::max(errors[m], deviation[k]);
    if (k < with_grandchildren) {
      const std::size_t lc = static_cast<std::size_t>((t.ay + t.cy) >> 1) * side + ((t.ax + t.cx) >> 1);
      const std::size_t rc = static_cast<std::size_t>((t.by + t.cy) >> 1) * side + ((t.bx + t.cx) >> 1);
      errors[m] = std::max({errors[m], errors[lc], errors[rc]});
    }
  }
  return errors;
}

TerrainMesh tessellate(const ElevationGrid& grid, double max_error) {
  if (grid.width != grid.height || !is_rtin_side(grid.width))
    throw Error(Errc::shape, "RTIN grids must be (2^k+1)^2, got " + std::to_string(grid.width) + "x" +
                                 std::to_string(grid.height));
  const int side = grid.width;
  const int tile = side - 1;
  // Nodata cannot be meshed; treat it as the lowest encodable terrain.
  std::vector<float> heights(grid.values);
  for (auto& h : heights)
    if (grid.is_nodata(h)) h = static_cast<float>(kMinElevation);
  const auto errors = rtin_errors(heights, side);

  TerrainMesh mesh;
  mesh.max_error = max_error;
  std::vector<std::int64_t> index_of(heights.size(), -1);
  auto vertex = [&](int x, int y) -> std::uint32_t {
    const std::size_t g = static_cast<std::size_t>(y) * side + x;
    if (index_of[g] < 0) {
      index_of[g] = static_cast<std::int64_t>(mesh.vertices.size());
      const GeoPoint p = grid.position(x, y);
      mesh.vertices.push_back({p.lon, p.lat, heights[g]});
    }
    return static_cast<std::uint32_t>(index_of[g]);
  };

  auto process = [&](auto& self, int ax, int ay, int bx, int by, int cx, int cy) -> void {
    const int mx = (ax + bx) >> 1;
    const int my = (ay + by) >> 1;
    const bool splittable = std::abs(ax - cx) + std::abs(ay - cy) > 1;
    if (splittable && (max_error <= 0.0 || errors[static_cast<std::size_t>(my) * side + mx] > max_error)) {
      self(self, cx, cy, ax, ay, mx, my);
      self(self, bx, by, cx, cy, mx, my);
      return;
    }
    std::uint32_t ia = vertex(ax, ay), ib = vertex(bx, by), ic = vertex(cx, cy);
    // Counter-clockwise in (lon, lat); grid y runs south so flip when the
    // grid-space winding is counter-clockwise.
    const long long w = static_cast<long long>(bx - ax) * (cy - ay) - static_cast<long long>(by - ay) * (cx - ax);
    if (w > 0) std::swap(ib, ic);
    mesh.triangles.push_back({ia, ib, ic});
  };
  process(process, 0, 0, tile, tile, tile, 0);
  process(process, tile, tile, 0, 0, 0, tile);
  return mesh;
}

ElevationGrid pad_for_tessellation(const ElevationGrid& grid) {
  grid.validate();
  const int need = std::max(grid.width, grid.height) - 1;
  const int side = static_cast<int>(std::bit_ceil(static_cast<unsigned>(std::max(need, 2)))) + 1;
  ElevationGrid out = grid;
  out.width = out.height = side;
  out.values.assign(static_cast<std::size_t>(side) * side, 0.0f);
  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i) out.at(i, j) = grid.at(std::min(i, grid.width - 1), std::min(j, grid.height - 1));
  return out;
}

// ---------------------------------------------------------------------------
// Raster IO

ElevationGrid read_ascii_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  ElevationGrid g;
  double xll = 0, yll = 0, cell = 0;
  bool x_center = false, y_center = false, have_cell = false;
  int ncols = -1, nrows = -1;
  std::string key;
  for (int fields = 0; fields < 6 && in >> key; ++fields) {
    std::string lower = key;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "ncols") in >> ncols;
    else if (lower == "nrows") in >> nrows;
    else if (lower == "xllcorner") in >> xll;
    else if (lower == "xllcenter") in >> xll, x_center = true;
    else if (lower == "yllcorner") in >> yll;
    else if (lower == "yllcenter") in >> yll, y_center = true;
    else if (lower == "cellsize") in >> cell, have_cell = true;
    else if (lower == "nodata_value") in >> g.nodata;
    else {
      // First data value: header ended early (no NODATA_value line).
      in.seekg(-static_cast<std::streamoff>(key.size()), std::ios::cur);
      break;
    }
  }
  if (ncols < 2 || nrows < 2 || !have_cell || !(cell > 0))
    throw Error(Errc::validation, "malformed ASCII grid header in " + path.string());
  g.width = ncols;
  g.height = nrows;
  g.dx = g.dy = cell;
  g.west = x_center ? xll : xll + cell / 2;
  const double south = y_center ? yll : yll + cell / 2;
  g.north = south + (nrows - 1) * cell;
  g.values.resize(static_cast<std::size_t>(ncols) * nrows);
  for (auto& v : g.values) {
    double d;
    if (!(in >> d)) throw Error(Errc::validation, "ASCII grid payload truncated in " + path.string());
    v = static_cast<float>(d);
  }
  g.validate();
  return g;
}

void write_ascii_grid(const std::filesystem::path& path, const ElevationGrid& g) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  if (std::abs(g.dx - g.dy) > 1e-12 * g.dx) throw Error(Errc::validation, "ASCII grids need square cells");
  out.precision(17);
  out << "ncols " << g.width << "\nnrows " << g.height << "\nxllcenter " << g.west << "\nyllcenter "
      << g.north - (g.height - 1) * g.dy << "\ncellsize " << g.dx << "\nNODATA_value " << g.nodata << "\n";
  out.precision(9);
  for (int j = 0; j < g.height; ++j) {
    for (int i = 0; i < g.width; ++i) out << (i ? " " : "") << g.at(i, j);
    out << "\n";
  }
}

namespace {
constexpr char kMagic[8] = {'C', 'T', 'G', 'R', 'I', 'D', '1', '\0'};

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "binary grids assume a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(Errc::validation, "binary grid truncated");
  return v;
}
}  // namespace

ElevationGrid read_binary_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw Error(Errc::validation, "not a binary grid: " + path.string());
  ElevationGrid g;
  g.width = static_cast<int>(get<std::uint32_t>(in));
  g.height = static_cast<int>(get<std::uint32_t>(in));
  g.west = get<double>(in);
  g.north = get<double>(in);
  g.dx = get<double>(in);
  g.dy = get<double>(in);
  g.nodata = get<float>(in);
  g.priority = get<std::int32_t>(in);
  if (g.width < 2 || g.height < 2 || g.width > 1 << 16 || g.height > 1 << 16)
    throw Error(Errc::validation, "binary grid dimensions out of range");
  g.values.resize(static_cast<std::size_t>(g.width) * g.height);
  if (!in.read(reinterpret_cast<char*>(g.values.data()), static_cast<std::streamsize>(g.values.size() * 4)))
    throw Error(Errc::validation, "binary grid payload truncated");
  g.validate();
  return g;
}

void write_binary_grid(const std::filesystem::path& path, const ElevationGrid& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out.write(kMagic, 8);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.height));
  put(out, g.west);
  put(out, g.north);
  put(out, g.dx);
  put(out, g.dy);
  put(out, g.nodata);
  put<std::int32_t>(out, g.priority);
  out.write(reinterpret_cast<const char*>(g.values.data()), static_cast<std::streamsize>(g.values.size() * 4));
}

ElevationGrid read_grid(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".asc" ? read_ascii_grid(path) : read_binary_grid(path);
}

}  // namespace citytwin
