#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "citytwin/feature_store.hpp"
#include "citytwin/geo.hpp"
#include "citytwin/geojson.hpp"
#include "citytwin/timeutil.hpp"

namespace citytwin {

struct BlockedCircle {
  GeoPoint center;
  double radius_m = 0.0;
};

struct ScenarioAreas {
  std::vector<GeoPolygon> polygons;
  std::vector<BlockedCircle> circles;

  bool empty() const { return polygons.empty() && circles.empty(); }
  /// Accepts a Polygon/MultiPolygon/Point geometry, a Feature (Point
  /// features may carry properties.radius_m), a FeatureCollection or a
  /// GeometryCollection. Throws Errc::validation.
  static ScenarioAreas from_geojson(const Json& j);
  Json to_geojson() const;
};

/// Whole-element blocking: any vertex inside, or any segment crossing, an
/// area blocks the element. Polygons are tested in lon/lat, circles in metres.
bool element_hits_polygon(const std::vector<GeoPoint>& line, const GeoPolygon& poly);
bool element_hits_circle(const std::vector<GeoPoint>& line, const BlockedCircle& circle);
std::set<std::string> blocked_elements(const RoadGraph& graph, const ScenarioAreas& areas);

struct Scenario {
  std::string id;
  ScenarioAreas areas;
  std::set<std::string> blocked;
  TimestampMs created = 0;

  Json to_json() const;
};

struct Route {
  std::string from_node;
  std::string to_node;
  std::vector<std::string> elements;
  std::vector<GeoPoint> polyline;
  double cost_s = 0.0;
  double length_m = 0.0;

  /// GeoJSON Feature; the geometry is null for an empty route.
  Json to_geojson() const;
};

struct RouterConfig {
  double snap_radius_m = 250.0;
};

/// Minimum travel-time routing over an immutable graph snapshot. Scenarios
/// never touch the graph; they only hide elements from the search.
class WhatIfRouter {
 public:
  explicit WhatIfRouter(std::shared_ptr<const RoadGraph> graph, RouterConfig config = {});

  /// Ids are "s1", "s2", ... in creation order. Throws Errc::validation for an
  /// empty area list.
  std::shared_ptr<const Scenario> create_scenario(ScenarioAreas areas, TimestampMs now = 0);
  /// Throws Errc::not_found.
  std::shared_ptr<const Scenario> scenario(const std::string& id) const;
  bool delete_scenario(const std::string& id);
  std::vector<std::string> scenario_ids() const;

  /// Nearest node within the snap radius, ties to the smallest id. Throws
  /// Errc::no_nearby_road.
  std::string snap(const GeoPoint& p) const;

  /// Ties are broken by cost, then hop count, then the lexicographically
  /// smallest element-id sequence. Throws Errc::no_route when the base graph
  /// has no path and Errc::blocked_by_scenario when only the scenario cuts it.
  Route route(const GeoPoint& from, const GeoPoint& to, const std::optional<std::string>& scenario_id = {}) const;
  Route route_nodes(const std::string& from, const std::string& to, const std::set<std::string>* blocked) const;
  /// Baseline and scenario routes from the same snapped nodes.
  std::pair<Route, Route> compare(const GeoPoint& from, const GeoPoint& to, const std::string& scenario_id) const;

  const RoadGraph& graph() const { return *graph_; }
  /// Elements closed in the base graph by active "closed" restrictions.
  const std::set<std::string>& base_closed() const { return base_closed_; }

 private:
  struct Edge {
    std::size_t to;
    const RoadElement* element;
  };
  std::optional<Route> search(std::size_t source, std::size_t target, const std::set<std::string>* blocked) const;

  std::shared_ptr<const RoadGraph> graph_;
  RouterConfig config_;
  std::vector<const RoadNode*> nodes_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<Edge>> out_;
  std::set<std::string> base_closed_;

  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const Scenario>> scenarios_;
  std::size_t next_id_ = 1;
};

}  // namespace citytwin
