#include "citytwin/fusion_cache.hpp"

#include <algorithm>
#include <exception>
#include <future>

#include "citytwin/error.hpp"

namespace citytwin {

void normalize_features(std::vector<ElementRecord>& features) {
  std::stable_sort(features.begin(), features.end(),
                   [](const ElementRecord& a, const ElementRecord& b) { return a.id < b.id; });
  features.erase(std::unique(features.begin(), features.end(),
                             [](const ElementRecord& a, const ElementRecord& b) { return a.id == b.id; }),
                 features.end());
}

FusionCache::FusionCache(FusionConfig config, TileFetcher fetcher)
    : config_(std::move(config)), fetcher_(std::move(fetcher)) {
  config_.max_concurrent_fetches = std::max(1, config_.max_concurrent_fetches);
  config_.eviction_delay_s = std::max(0.0, config_.eviction_delay_s);
}

int FusionCache::publication_zoom(const std::string& dataset, const TileId& requested) const {
  if (auto it = config_.data_zoom.find(dataset); it != config_.data_zoom.end()) return it->second;
  int deepest = requested.z;
  for (const auto& [key, entry] : entries_)
    if (key.dataset == dataset && is_ancestor_or_self(requested, key.tile)) deepest = std::max(deepest, key.tile.z);
  return deepest;
}

bool FusionCache::contains(const std::string& dataset, const TileId& t) const {
  return entries_.count(Key{dataset, t}) != 0;
}

const CachedTile* FusionCache::find(const std::string& dataset, const TileId& t) const {
  auto it = entries_.find(Key{dataset, t});
  return it == entries_.end() ? nullptr : &it->second.tile;
}

void FusionCache::insert(const std::string& dataset, const TileId& t, std::vector<ElementRecord> features,
                         TileOrigin origin, double now) {
  std::erase_if(features, [&](const ElementRecord& e) { return !tile_contains(t, e.anchor); });
  normalize_features(features);
  Entry entry;
  entry.tile = CachedTile{t, std::move(features), now, origin};
  entry.last_visible = now;
  entries_[Key{dataset, t}] = std::move(entry);
}

std::optional<std::vector<ElementRecord>> FusionCache::top_down_fusion(const std::string& dataset,
                                                                        const TileId& child, double now) {
  for (int z = child.z - 1; z >= 0; --z) {
    const auto it = entries_.find(Key{dataset, ancestor_at(child, z)});
    if (it == entries_.end()) continue;
    std::vector<ElementRecord> picked;
    for (const auto& e : it->second.tile.features)
      if (tile_contains(child, e.anchor)) picked.push_back(e);
    insert(dataset, child, picked, TileOrigin::fused_top_down, now);
    return picked;
  }
  return std::nullopt;
}

void FusionCache::collect(const std::string& dataset, const TileId& t, int limit_zoom,
                          std::vector<ElementRecord>& found, std::vector<TileId>& missing) const {
  if (const auto* cached = find(dataset, t)) {
    found.insert(found.end(), cached->features.begin(), cached->features.end());
    return;
  }
  if (t.z >= limit_zoom) {
    missing.push_back(t);
    return;
  }
  for (const auto& c : children(t)) collect(dataset, c, limit_zoom, found, missing);
}

BottomUpResult FusionCache::bottom_up_fusion(const std::string& dataset, const TileId& parent_tile, double now) {
  const int limit = publication_zoom(dataset, parent_tile);
  std::vector<ElementRecord> found;
  std::vector<TileId> missing;
  if (const auto* cached = find(dataset, parent_tile)) return cached->features;
  if (parent_tile.z >= limit) return MissingTiles{{parent_tile}};
  for (const auto& c : children(parent_tile)) collect(dataset, c, limit, found, missing);
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    return MissingTiles{std::move(missing)};
  }
  insert(dataset, parent_tile, found, TileOrigin::fused_bottom_up, now);
  return find(dataset, parent_tile)->features;
}

DeepLoadResult FusionCache::deep_load(const std::string& dataset, const TileId& view_tile, double now) {
  DeepLoadResult result;
  if (const auto* cached = find(dataset, view_tile)) {
    result.features = cached->features;
    return result;
  }
  if (auto fused = top_down_fusion(dataset, view_tile, now)) {
    result.features = std::move(*fused);
    normalize_features(result.features);
    return result;
  }

  const bool fixed_zoom = config_.data_zoom.count(dataset) != 0;
  std::vector<TileId> to_fetch;
  if (fixed_zoom && view_tile.z > config_.data_zoom.at(dataset)) {
    to_fetch.push_back(ancestor_at(view_tile, config_.data_zoom.at(dataset)));
  } else {
    auto fused = bottom_up_fusion(dataset, view_tile, now);
    if (auto* features = std::get_if<std::vector<ElementRecord>>(&fused)) {
      result.features = std::move(*features);
      return result;
    }
    to_fetch = fixed_zoom ? std::get<MissingTiles>(fused).tiles : std::vector<TileId>{view_tile};
  }

  // Issue the sub-tile requests in waves of at most max_concurrent_fetches;
  // completions are merged by tile order, not arrival order.
  std::vector<std::optional<std::vector<ElementRecord>>> responses(to_fetch.size());
  const std::size_t wave = static_cast<std::size_t>(config_.max_concurrent_fetches);
  for (std::size_t begin = 0; begin < to_fetch.size(); begin += wave) {
    const std::size_t end = std::min(to_fetch.size(), begin + wave);
    std::vector<std::future<std::vector<ElementRecord>>> inflight;
    for (std::size_t i = begin; i < end; ++i) {
      fetches_.fetch_add(1);
      inflight.push_back(std::async(std::launch::async, fetcher_, dataset, to_fetch[i]));
    }
    for (std::size_t i = begin; i < end; ++i) {
      try {
        responses[i] = inflight[i - begin].get();
      } catch (const std::exception&) {
        responses[i].reset();
      }
    }
  }
  result.fetches = to_fetch.size();

  for (std::size_t i = 0; i < to_fetch.size(); ++i) {
    if (responses[i])
      insert(dataset, to_fetch[i], std::move(*responses[i]), TileOrigin::fetched, now);
    else
      result.failed.push_back(to_fetch[i]);
  }
  if (!result.failed.empty()) return result;

  if (const auto* cached = find(dataset, view_tile)) {
    result.features = cached->features;
  } else if (auto fused = top_down_fusion(dataset, view_tile, now)) {
    result.features = std::move(*fused);
    normalize_features(result.features);
  } else {
    auto aggregate = bottom_up_fusion(dataset, view_tile, now);
    result.features = std::get<std::vector<ElementRecord>>(std::move(aggregate));
  }
  return result;
}

ViewResult FusionCache::request_view(const ViewFrustum& view, const std::string& dataset, double now) {
  ViewResult out;
  std::set<TileId> visible;
  for (const auto& vt : tiles_in_view(view)) {
    auto loaded = deep_load(dataset, vt.tile, now);
    out.fetch_count += loaded.fetches;
    out.tiles.push_back({vt, std::move(loaded.features), std::move(loaded.failed)});
    visible.insert(vt.tile);
  }
  note_view(visible, now);
  return out;
}

void FusionCache::note_view(const std::set<TileId>& visible, double now) {
  std::set<TileId> covered;  // visible tiles and all of their ancestors
  for (const auto& v : visible)
    for (int z = v.z; z >= 0; --z) covered.insert(ancestor_at(v, z));

  for (auto& [key, entry] : entries_) {
    bool overlaps = covered.count(key.tile) != 0;
    for (int z = key.tile.z - 1; !overlaps && z >= 0; --z) overlaps = visible.count(ancestor_at(key.tile, z)) != 0;
    if (overlaps) {
      entry.visible = true;
      entry.last_visible = now;
    } else if (entry.visible) {
      entry.visible = false;
      entry.last_visible = now;
    }
  }
}

std::size_t FusionCache::evict(double now) {
  return std::erase_if(entries_, [&](const auto& kv) {
    const Entry& e = kv.second;
    return !e.visible && now - e.last_visible >= config_.eviction_delay_s;
  });
}

// ---------------------------------------------------------------------------

void SimulatedOrigin::add(const std::string& dataset, ElementRecord record) {
  data_[dataset].push_back(std::move(record));
}

std::vector<ElementRecord> SimulatedOrigin::fetch(const std::string& dataset, const TileId& t) const {
  std::vector<ElementRecord> out;
  if (auto it = data_.find(dataset); it != data_.end())
    for (const auto& r : it->second)
      if (tile_contains(t, r.anchor)) out.push_back(r);
  normalize_features(out);
  return out;
}

TileFetcher SimulatedOrigin::fetcher() {
  return [this](const std::string& dataset, const TileId& t) {
    ++calls_;
    if (failing_.count(t)) throw Error(Errc::fetch_failed, "simulated failure for " + t.to_string());
    return fetch(dataset, t);
  };
}

}  // namespace citytwin
