#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "citytwin/tile_pyramid.hpp"

namespace citytwin {

/// One element served by a tiled dataset.
struct ElementRecord {
  std::string id;
  GeoPoint anchor;
  std::string payload;
  std::string kind;

  friend bool operator==(const ElementRecord&, const ElementRecord&) = default;
};

/// How a cache entry came to exist. All of them are complete: fused entries
/// derive from complete relatives.
enum class TileOrigin { fetched, fused_top_down, fused_bottom_up };

struct CachedTile {
  TileId tile;
  std::vector<ElementRecord> features;  // sorted by id
  double fetched_at = 0.0;
  TileOrigin origin = TileOrigin::fetched;
};

/// Fetches the element list of one tile from the origin. Must be callable
/// from several threads at once; signals failure by throwing.
using TileFetcher = std::function<std::vector<ElementRecord>(const std::string& dataset, const TileId&)>;

struct FusionConfig {
  /// Zoom at which each dataset is published. Datasets absent from the map
  /// are fetched at whatever zoom is requested.
  std::map<std::string, int> data_zoom{{"buildings", kBuildingZoom}};
  double eviction_delay_s = 10.0;
  int max_concurrent_fetches = 8;
};

struct MissingTiles {
  std::vector<TileId> tiles;
};

using BottomUpResult = std::variant<std::vector<ElementRecord>, MissingTiles>;

struct DeepLoadResult {
  std::vector<ElementRecord> features;
  std::vector<TileId> failed;
  std::size_t fetches = 0;

  bool ok() const { return failed.empty(); }
};

struct ViewTileResult {
  ViewTile view;
  std::vector<ElementRecord> features;
  std::vector<TileId> failed;
};

struct ViewResult {
  std::vector<ViewTileResult> tiles;  // near to far
  std::size_t fetch_count = 0;
};

/// Client-side element cache that reuses fetched tiles across zoom levels.
///
/// Zooming in is served by filtering a cached ancestor (top-down fusion),
/// zooming out by concatenating cached descendants (bottom-up fusion), and
/// views coarser than a dataset's publication zoom are assembled from
/// concurrent sub-tile fetches (deep load). Entries are keyed by
/// (dataset, tile); datasets never fuse with each other.
///
/// One instance serves one client session. Public methods may be called from
/// one thread at a time; fetches issued by deep_load run concurrently.
class FusionCache {
 public:
  FusionCache(FusionConfig config, TileFetcher fetcher);

  /// Features of `child` filtered from the nearest complete cached ancestor,
  /// at any zoom distance. The fused tile is cached. nullopt on a miss.
  std::optional<std::vector<ElementRecord>> top_down_fusion(const std::string& dataset, const TileId& child,
                                                            double now = 0.0);

  /// Union of cached descendants (deduplicated by id), or the descendant
  /// tiles at the dataset's publication zoom that still need fetching.
  BottomUpResult bottom_up_fusion(const std::string& dataset, const TileId& parent, double now = 0.0);

  /// Resolves `view_tile` from cache where possible and fetches only the
  /// missing publication-zoom sub-tiles, all in flight together. The
  /// aggregate is returned only when every sub-tile resolved.
  DeepLoadResult deep_load(const std::string& dataset, const TileId& view_tile, double now = 0.0);

  /// Loads every tile of the view, near to far, then marks them visible.
  ViewResult request_view(const ViewFrustum& view, const std::string& dataset, double now = 0.0);

  /// Records which tiles are on screen. Cached tiles overlapping any of them
  /// (same tile, ancestor or descendant) count as visible.
  void note_view(const std::set<TileId>& visible, double now);
  /// Drops tiles that have been out of view for at least the eviction delay.
  /// Returns how many were removed.
  std::size_t evict(double now);

  bool contains(const std::string& dataset, const TileId& t) const;
  const CachedTile* find(const std::string& dataset, const TileId& t) const;
  std::size_t size() const { return entries_.size(); }
  /// Total origin calls made by this instance.
  std::size_t fetch_count() const { return fetches_.load(); }
  const FusionConfig& config() const { return config_; }

 private:
  struct Key {
    std::string dataset;
    TileId tile;
    friend auto operator<=>(const Key&, const Key&) = default;
  };
  struct Entry {
    CachedTile tile;
    double last_visible = 0.0;
    bool visible = false;
  };

  int publication_zoom(const std::string& dataset, const TileId& requested) const;
  void insert(const std::string& dataset, const TileId& t, std::vector<ElementRecord> features,
              TileOrigin origin, double now);
  void collect(const std::string& dataset, const TileId& t, int limit_zoom, std::vector<ElementRecord>& found,
               std::vector<TileId>& missing) const;

  FusionConfig config_;
  TileFetcher fetcher_;
  std::map<Key, Entry> entries_;
  std::atomic<std::size_t> fetches_{0};
};

/// Sorts by id and drops later duplicates.
void normalize_features(std::vector<ElementRecord>& features);

/// Deterministic in-memory origin for tests and benchmarks. A tile request
/// returns the dataset's records anchored inside the tile, sorted by id.
class SimulatedOrigin {
 public:
  SimulatedOrigin() = default;
  /// Fetchers created before the move keep pointing at the old object.
  SimulatedOrigin(SimulatedOrigin&& o) noexcept
      : data_(std::move(o.data_)), failing_(std::move(o.failing_)), calls_(o.calls_.load()) {}

  void add(const std::string& dataset, ElementRecord record);
  std::vector<ElementRecord> fetch(const std::string& dataset, const TileId& t) const;
  /// Thread-safe fetcher bound to this origin; failing tiles throw
  /// Errc::fetch_failed.
  TileFetcher fetcher();

  std::size_t calls() const { return calls_.load(); }
  void fail_on(const TileId& t) { failing_.insert(t); }
  void clear_failures() { failing_.clear(); }

 private:
  std::map<std::string, std::vector<ElementRecord>> data_;
  std::set<TileId> failing_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace citytwin
