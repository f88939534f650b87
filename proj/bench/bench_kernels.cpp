// Serial reference vs OpenMP kernels. Run with
//   ./build/bench/bench_kernels --benchmark_counters_tabular=true
// and vary OMP_NUM_THREADS to see scaling.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "citytwin/compositor.hpp"
#include "citytwin/kernels.hpp"
#include "citytwin/terrain.hpp"

using namespace citytwin;

namespace {

constexpr TileId kTile{15, 17408, 11945};

const MergedTerrain& terrain() {
  static const MergedTerrain m = [] {
    const GeoBBox b = tile_bounds(kTile);
    ElevationGrid g;
    g.width = g.height = 600;
    g.west = b.min_lon - 0.001;
    g.north = b.max_lat + 0.001;
    g.dx = g.dy = (b.max_lon - b.min_lon + 0.002) / 599;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < g.width * g.height; ++i) g.values.push_back(static_cast<float>(40 + 20 * u(rng)));
    return MergedTerrain({g});
  }();
  return m;
}

std::vector<float> heights(int side) {
  std::vector<float> h(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) h[static_cast<std::size_t>(y) * side + x] = static_cast<float>(30 * std::sin(x * 0.05) * std::cos(y * 0.07));
  return h;
}

std::vector<RgbaImage> layers_of(int size, int count) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<RgbaImage> imgs(static_cast<std::size_t>(count), RgbaImage(size, size));
  for (auto& img : imgs)
    for (auto& px : img.pixels) px = {u(rng), u(rng), u(rng), u(rng)};
  return imgs;
}

template <bool Parallel>
void BM_SampleTile(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  for (auto _ : state) {
    if constexpr (Parallel) parallel::sample_tile(terrain(), kTile, size, out);
    else serial::sample_tile(terrain(), kTile, size, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * size * size);
}

template <bool Parallel>
void BM_EncodeRaster(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)) * state.range(0);
  std::vector<double> elev(n);
  for (std::size_t i = 0; i < n; ++i) elev[i] = std::fmod(i * 0.37, 3000.0) - 100;
  std::vector<std::uint8_t> rgb(3 * n);
  for (auto _ : state) {
    if constexpr (Parallel) parallel::encode_raster(elev, rgb);
    else serial::encode_raster(elev, rgb);
    benchmark::DoNotOptimize(rgb.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_RtinDeviation(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0)) + 1;
  const auto h = heights(side);
  for (auto _ : state) {
    auto d = Parallel ? parallel::rtin_triangle_deviation(h, side) : serial::rtin_triangle_deviation(h, side);
    benchmark::DoNotOptimize(d.data());
  }
}

template <bool Parallel>
void BM_Composite(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto imgs = layers_of(size, 4);
  std::vector<CompositeLayer> layers;
  for (const auto& img : imgs) layers.push_back({&img, 0.8});
  RgbaImage out(size, size);
  for (auto _ : state) {
    if constexpr (Parallel) parallel::composite(layers, out);
    else serial::composite(layers, out);
    benchmark::DoNotOptimize(out.pixels.data());
  }
  state.SetItemsProcessed(state.iterations() * size * size);
}

template <bool Parallel>
void BM_Colormap(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  Colormap cm;
  cm.stops = {{0, {0, 0, 1, 0.2}}, {0.5, {0, 1, 0, 0.6}}, {1, {1, 0, 0, 1}}};
  std::vector<double> values(static_cast<std::size_t>(size) * size);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::fmod(i * 0.013, 1.2) - 0.1;
  RgbaImage out(size, size);
  for (auto _ : state) {
    if constexpr (Parallel) parallel::apply_colormap(values, cm, 0.8, out);
    else serial::apply_colormap(values, cm, 0.8, out);
    benchmark::DoNotOptimize(out.pixels.data());
  }
  state.SetItemsProcessed(state.iterations() * size * size);
}

}  // namespace

BENCHMARK(BM_SampleTile<false>)->Arg(256)->Arg(512)->Name("sample_tile/serial")->UseRealTime();
BENCHMARK(BM_SampleTile<true>)->Arg(256)->Arg(512)->Name("sample_tile/parallel")->UseRealTime();
BENCHMARK(BM_EncodeRaster<false>)->Arg(256)->Arg(1024)->Name("encode_raster/serial")->UseRealTime();
BENCHMARK(BM_EncodeRaster<true>)->Arg(256)->Arg(1024)->Name("encode_raster/parallel")->UseRealTime();
BENCHMARK(BM_RtinDeviation<false>)->Arg(64)->Arg(256)->Name("rtin_deviation/serial")->UseRealTime();
BENCHMARK(BM_RtinDeviation<true>)->Arg(64)->Arg(256)->Name("rtin_deviation/parallel")->UseRealTime();
BENCHMARK(BM_Composite<false>)->Arg(256)->Arg(1024)->Name("composite/serial")->UseRealTime();
BENCHMARK(BM_Composite<true>)->Arg(256)->Arg(1024)->Name("composite/parallel")->UseRealTime();
BENCHMARK(BM_Colormap<false>)->Arg(256)->Arg(1024)->Name("colormap/serial")->UseRealTime();
BENCHMARK(BM_Colormap<true>)->Arg(256)->Arg(1024)->Name("colormap/parallel")->UseRealTime();

BENCHMARK_MAIN();
