#include "citytwin/whatif_router.hpp"

#include <algorithm>
#include <limits>
#include <mutex>
#include <queue>
#include <tuple>

#include "citytwin/error.hpp"

namespace citytwin {

// ---------------------------------------------------------------------------
// Areas

namespace {

void collect_areas(const Json& j, ScenarioAreas& out) {
  if (!j.is_object()) throw Error(Errc::validation, "scenario area must be a GeoJSON object");
  const std::string type = j.value("type", "");
  if (type == "FeatureCollection") {
    for (const auto& f : j.at("features")) collect_areas(f, out);
  } else if (type == "GeometryCollection") {
    for (const auto& g : j.at("geometries")) collect_areas(g, out);
  } else if (type == "Feature") {
    const Json& g = j.at("geometry");
    if (g.is_object() && g.value("type", "") == "Point") {
      const Json props = j.contains("properties") && j["properties"].is_object() ? j["properties"] : Json::object();
      const double r = props.value("radius_m", 0.0);
      out.circles.push_back({parse_position(g.at("coordinates")), r});
    } else {
      collect_areas(g, out);
    }
  } else if (type == "Point") {
    out.circles.push_back({parse_position(j.at("coordinates")), 0.0});
  } else if (type == "Polygon" || type == "MultiPolygon") {
    for (auto& p : parse_polygons(j)) out.polygons.push_back(std::move(p));
  } else {
    throw Error(Errc::validation, "unsupported scenario area type '" + type + "'");
  }
}

}  // namespace

ScenarioAreas ScenarioAreas::from_geojson(const Json& j) {
  ScenarioAreas out;
  try {
    collect_areas(j, out);
  } catch (const Json::exception& e) {
    throw Error(Errc::validation, std::string("scenario areas: ") + e.what());
  }
  for (const auto& c : out.circles)
    if (!(c.radius_m >= 0.0) || !std::isfinite(c.radius_m))
      throw Error(Errc::validation, "blocked point radius must be a non-negative number");
  return out;
}

Json ScenarioAreas::to_geojson() const {
  Json features = Json::array();
  for (const auto& p : polygons)
    features.push_back({{"type", "Feature"}, {"geometry", citytwin::to_geojson(p)}, {"properties", Json::object()}});
  for (const auto& c : circles)
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", position_json(c.center)}}},
                        {"properties", {{"radius_m", c.radius_m}}}});
  return {{"type", "FeatureCollection"}, {"features", features}};
}

bool element_hits_polygon(const std::vector<GeoPoint>& line, const GeoPolygon& poly) {
  for (const auto& p : line)
    if (point_in_polygon(p, poly)) return true;
  auto ring_crossed = [&](const std::vector<GeoPoint>& ring) {
    const std::size_t n = ring.size();
    for (std::size_t i = 1; i < line.size(); ++i) {
      const Vec2 a{line[i - 1].lon, line[i - 1].lat};
      const Vec2 b{line[i].lon, line[i].lat};
      for (std::size_t k = 0; k < n; ++k) {
        const Vec2 c{ring[k].lon, ring[k].lat};
        const Vec2 d{ring[(k + 1) % n].lon, ring[(k + 1) % n].lat};
        if (segments_intersect(a, b, c, d)) return true;
      }
    }
    return false;
  };
  if (ring_crossed(poly.outer)) return true;
  for (const auto& h : poly.holes)
    if (ring_crossed(h)) return true;
  return false;
}

bool element_hits_circle(const std::vector<GeoPoint>& line, const BlockedCircle& circle) {
  const LocalFrame frame(circle.center);
  const Vec2 origin{0, 0};
  if (line.size() == 1) return std::hypot(frame.to_local(line[0]).x, frame.to_local(line[0]).y) <= circle.radius_m;
  for (std::size_t i = 1; i < line.size(); ++i)
    if (point_segment_distance(origin, frame.to_local(line[i - 1]), frame.to_local(line[i])) <= circle.radius_m)
      return true;
  return false;
}

std::set<std::string> blocked_elements(const RoadGraph& graph, const ScenarioAreas& areas) {
  std::set<std::string> out;
  for (const auto& [id, e] : graph.elements()) {
    const bool hit =
        std::any_of(areas.polygons.begin(), areas.polygons.end(),
                    [&](const GeoPolygon& p) { return element_hits_polygon(e.geometry, p); }) ||
        std::any_of(areas.circles.begin(), areas.circles.end(),
                    [&](const BlockedCircle& c) { return element_hits_circle(e.geometry, c); });
    if (hit) out.insert(id);
  }
  return out;
}

Json Scenario::to_json() const {
  return {{"id", id},
          {"areas", areas.to_geojson()},
          {"blocked_elements", std::vector<std::string>(blocked.begin(), blocked.end())},
          {"created", format_rfc3339(created)}};
}

Json Route::to_geojson() const {
  Json geometry = polyline.size() >= 2 ? linestring_json(polyline) : Json(nullptr);
  return {{"type", "Feature"},
          {"geometry", geometry},
          {"properties",
           {{"from_node", from_node},
            {"to_node", to_node},
            {"elements", elements},
            {"cost_s", cost_s},
            {"length_m", length_m}}}};
}

// ---------------------------------------------------------------------------
// Router

WhatIfRouter::WhatIfRouter(std::shared_ptr<const RoadGraph> graph, RouterConfig config)
    : graph_(std::move(graph)), config_(config) {
  if (!graph_) throw Error(Errc::validation, "router needs a graph");
  for (const auto& [id, n] : graph_->nodes()) {
    index_.emplace(id, nodes_.size());
    nodes_.push_back(&n);
  }
  out_.resize(nodes_.size());
  for (const auto& [id, e] : graph_->elements()) out_[index_.at(e.from)].push_back({index_.at(e.to), &e});
  for (const auto& [id, r] : graph_->restrictions())
    if (r.active && r.kind == "closed") base_closed_.insert(r.elements.begin(), r.elements.end());
}

std::shared_ptr<const Scenario> WhatIfRouter::create_scenario(ScenarioAreas areas, TimestampMs now) {
  if (areas.empty()) throw Error(Errc::validation, "a scenario needs at least one area");
  auto s = std::make_shared<Scenario>();
  s->blocked = blocked_elements(*graph_, areas);
  s->areas = std::move(areas);
  s->created = now;
  std::unique_lock lock(mutex_);
  s->id = "s" + std::to_string(next_id_++);
  scenarios_[s->id] = s;
  return s;
}

std::shared_ptr<const Scenario> WhatIfRouter::scenario(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = scenarios_.find(id);
  if (it == scenarios_.end()) throw Error(Errc::not_found, "unknown scenario " + id);
  return it->second;
}

bool WhatIfRouter::delete_scenario(const std::string& id) {
  std::unique_lock lock(mutex_);
  return scenarios_.erase(id) != 0;
}

std::vector<std::string> WhatIfRouter::scenario_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : scenarios_) out.push_back(id);
  return out;
}

std::string WhatIfRouter::snap(const GeoPoint& p) const {
  const RoadNode* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const RoadNode* n : nodes_) {  // id order, so the first minimum wins ties
    const double d = haversine_m(p, n->position);
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  if (!best || best_d > config_.snap_radius_m)
    throw Error(Errc::no_nearby_road, "no road node within " + std::to_string(config_.snap_radius_m) + " m");
  return best->id;
}

std::optional<Route> WhatIfRouter::search(std::size_t source, std::size_t target,
                                          const std::set<std::string>* blocked) const {
  const std::size_t n = nodes_.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<std::size_t> hops(n, 0);
  std::vector<const Edge*> via(n, nullptr);
  std::vector<char> done(n, 0);

  auto path_of = [&](std::size_t v) {
    std::vector<const std::string*> seq;
    while (via[v]) {
      seq.push_back(&via[v]->element->id);
      v = index_.at(via[v]->element->from);
    }
    std::reverse(seq.begin(), seq.end());
    return seq;
  };
  // Is (path to u) + e lexicographically smaller than the current path to v?
  auto smaller_sequence = [&](std::size_t u, const Edge& e, std::size_t v) {
    auto a = path_of(u);
    a.push_back(&e.element->id);
    const auto b = path_of(v);
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [](const std::string* x, const std::string* y) { return *x < *y; });
  };

  using Item = std::tuple<double, std::size_t, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.emplace(0.0, 0, source);
  while (!queue.empty()) {
    const auto [d, h, u] = queue.top();
    queue.pop();
    if (done[u] || d != dist[u] || h != hops[u]) continue;
    done[u] = 1;
    if (u == target) break;
    for (const Edge& e : out_[u]) {
      if (base_closed_.count(e.element->id) || (blocked && blocked->count(e.element->id))) continue;
      if (done[e.to]) continue;
      const double nd = dist[u] + e.element->travel_time_s();
      const std::size_t nh = hops[u] + 1;
      bool better = nd < dist[e.to];
      if (!better && nd == dist[e.to]) better = nh < hops[e.to] || (nh == hops[e.to] && smaller_sequence(u, e, e.to));
      if (better) {
        dist[e.to] = nd;
        hops[e.to] = nh;
        via[e.to] = &e;
        queue.emplace(nd, nh, e.to);
      }
    }
  }
  if (dist[target] == kInf) return std::nullopt;

  Route r;
  r.from_node = nodes_[source]->id;
  r.to_node = nodes_[target]->id;
  r.cost_s = dist[target];
  std::vector<const RoadElement*> chain;
  for (std::size_t v = target; via[v]; v = index_.at(via[v]->element->from)) chain.push_back(via[v]->element);
  std::reverse(chain.begin(), chain.end());
  r.polyline.push_back(nodes_[source]->position);
  for (const RoadElement* e : chain) {
    r.elements.push_back(e->id);
    r.length_m += e->length_m;
    auto begin = e->geometry.begin();
    if (!r.polyline.empty() && *begin == r.polyline.back()) ++begin;
    r.polyline.insert(r.polyline.end(), begin, e->geometry.end());
  }
  return r;
}

Route WhatIfRouter::route_nodes(const std::string& from, const std::string& to,
                                const std::set<std::string>* blocked) const {
  auto fi = index_.find(from);
  auto ti = index_.find(to);
  if (fi == index_.end() || ti == index_.end()) throw Error(Errc::not_found, "unknown route endpoint node");
  if (auto r = search(fi->second, ti->second, blocked)) return *r;
  if (blocked && !blocked->empty() && search(fi->second, ti->second, nullptr))
    throw Error(Errc::blocked_by_scenario, "the scenario disconnects " + from + " from " + to);
  throw Error(Errc::no_route, "no path from " + from + " to " + to + " in the road graph");
}

Route WhatIfRouter::route(const GeoPoint& from, const GeoPoint& to,
                          const std::optional<std::string>& scenario_id) const {
  std::shared_ptr<const Scenario> s;
  if (scenario_id) s = scenario(*scenario_id);
  return route_nodes(snap(from), snap(to), s ? &s->blocked : nullptr);
}

std::pair<Route, Route> WhatIfRouter::compare(const GeoPoint& from, const GeoPoint& to,
                                              const std::string& scenario_id) const {
  const auto s = scenario(scenario_id);
  const std::string a = snap(from);
  const std::string b = snap(to);
  return {route_nodes(a, b, nullptr), route_nodes(a, b, &s->blocked)};
}

}  // namespace citytwin
