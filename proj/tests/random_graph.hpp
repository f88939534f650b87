#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "citytwin/feature_store.hpp"
#include "citytwin/whatif_router.hpp"
#include "oracles/oracles.hpp"

namespace testing {

// Jittered-grid road graphs. With maxspeed 3.6 km/h the travel time equals
// the (integer) length, so path costs are exact in double arithmetic.
struct RandomGraph {
  std::shared_ptr<citytwin::RoadGraph> graph = std::make_shared<citytwin::RoadGraph>();
  std::vector<std::string> node_ids;
  citytwin::GeoBBox extent = citytwin::GeoBBox::empty();
};

inline std::string node_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "n%04zu", i);
  return buf;
}

inline RandomGraph random_graph(std::mt19937_64& rng, int max_nodes = 500, bool integer_costs = true) {
  using namespace citytwin;
  std::uniform_real_distribution<double> u(0, 1);
  const int side = 3 + static_cast<int>(rng() % static_cast<unsigned>(std::sqrt(max_nodes) - 2));
  RandomGraph g;
  const double step = 0.001;
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const GeoPoint p{11.2 + (c + 0.6 * (u(rng) - 0.5)) * step, 43.7 + (r + 0.6 * (u(rng) - 0.5)) * step};
      g.node_ids.push_back(node_name(g.node_ids.size()));
      g.graph->add_node({g.node_ids.back(), p});
      g.extent.extend(p);
    }
  int next = 0;
  auto link = [&](int a, int b) {
    RoadElement e;
    e.id = "e" + std::to_string(next++);
    e.from = g.node_ids[a];
    e.to = g.node_ids[b];
    if (integer_costs) {
      e.length_m = static_cast<double>(1 + rng() % 100);
      e.maxspeed_kmh = 3.6;
    } else {
      e.maxspeed_kmh = 20 + static_cast<double>(rng() % 60);
    }
    g.graph->add_element(e);
  };
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const int v = r * side + c;
      for (int w : {c + 1 < side ? v + 1 : -1, r + 1 < side ? v + side : -1, (c + 1 < side && r + 1 < side) ? v + side + 1 : -1}) {
        if (w < 0 || u(rng) < 0.15) continue;
        const double kind = u(rng);
        if (kind < 0.7) {
          link(v, w);
          link(w, v);
        } else if (kind < 0.85) {
          link(v, w);
        } else {
          link(w, v);
        }
      }
    }
  return g;
}

inline citytwin::ScenarioAreas random_areas(std::mt19937_64& rng, const citytwin::GeoBBox& extent) {
  using namespace citytwin;
  std::uniform_real_distribution<double> u(0, 1);
  ScenarioAreas a;
  const int n = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < n; ++i) {
    const double cx = extent.min_lon + u(rng) * (extent.max_lon - extent.min_lon);
    const double cy = extent.min_lat + u(rng) * (extent.max_lat - extent.min_lat);
    if (rng() % 3 == 0) {
      a.circles.push_back({{cx, cy}, 20 + 150 * u(rng)});
    } else {
      GeoPolygon p;
      const int k = 3 + static_cast<int>(rng() % 5);
      const double radius = 0.0003 + 0.0015 * u(rng);
      for (int j = 0; j < k; ++j) {
        const double t = 2 * oracle::kPi * (j + 0.8 * u(rng)) / k;
        p.outer.push_back({cx + radius * std::cos(t), cy + 0.7 * radius * std::sin(t)});
      }
      a.polygons.push_back(p);
    }
  }
  return a;
}

// Brute-force route cost with Bellman-Ford over unblocked elements.
inline double oracle_cost(const citytwin::RoadGraph& g, const std::set<std::string>& blocked, const std::string& from,
                          const std::string& to) {
  std::map<std::string, int> index;
  for (const auto& [id, n] : g.nodes()) index.emplace(id, static_cast<int>(index.size()));
  std::vector<oracle::Arc> arcs;
  for (const auto& [id, e] : g.elements())
    if (!blocked.count(id)) arcs.push_back({index.at(e.from), index.at(e.to), e.length_m / (e.maxspeed_kmh / 3.6)});
  return oracle::bellman_ford(static_cast<int>(index.size()), arcs, index.at(from))[index.at(to)];
}

// A route is a connected chain from `from` to `to` avoiding `blocked`, whose
// element costs add up to the reported cost.
inline bool route_is_valid(const citytwin::RoadGraph& g, const citytwin::Route& r, const std::set<std::string>& blocked) {
  std::string at = r.from_node;
  double cost = 0;
  for (const auto& id : r.elements) {
    const auto* e = g.element(id);
    if (!e || e->from != at || blocked.count(id)) return false;
    cost += e->travel_time_s();
    at = e->to;
  }
  return at == r.to_node && std::abs(cost - r.cost_s) <= 1e-9 * std::max(1.0, cost);
}

// Independent blocked-element test in lon/lat (polygons) and an
// equirectangular metric frame (circles).
inline bool seg_cross(double ax, double ay, double bx, double by, double cx, double cy, double dx, double dy) {
  auto orient = [](double px, double py, double qx, double qy, double rx, double ry) {
    const double v = (qx - px) * (ry - py) - (qy - py) * (rx - px);
    return (v > 0) - (v < 0);
  };
  auto on = [](double px, double py, double qx, double qy, double rx, double ry) {
    return std::min(px, qx) <= rx && rx <= std::max(px, qx) && std::min(py, qy) <= ry && ry <= std::max(py, qy);
  };
  const int o1 = orient(ax, ay, bx, by, cx, cy), o2 = orient(ax, ay, bx, by, dx, dy);
  const int o3 = orient(cx, cy, dx, dy, ax, ay), o4 = orient(cx, cy, dx, dy, bx, by);
  if (o1 != o2 && o3 != o4) return true;
  return (o1 == 0 && on(ax, ay, bx, by, cx, cy)) || (o2 == 0 && on(ax, ay, bx, by, dx, dy)) ||
         (o3 == 0 && on(cx, cy, dx, dy, ax, ay)) || (o4 == 0 && on(cx, cy, dx, dy, bx, by));
}

inline bool oracle_blocks(const std::vector<citytwin::GeoPoint>& line, const citytwin::ScenarioAreas& areas) {
  for (const auto& poly : areas.polygons) {
    std::vector<std::pair<double, double>> ring;
    for (const auto& p : poly.outer) ring.emplace_back(p.lon, p.lat);
    for (const auto& p : line)
      if (oracle::inside(ring, p.lon, p.lat)) return true;
    for (std::size_t i = 1; i < line.size(); ++i)
      for (std::size_t k = 0; k < ring.size(); ++k) {
        const auto& c = ring[k];
        const auto& d = ring[(k + 1) % ring.size()];
        if (seg_cross(line[i - 1].lon, line[i - 1].lat, line[i].lon, line[i].lat, c.first, c.second, d.first, d.second))
          return true;
      }
  }
  for (const auto& c : areas.circles) {
    const double kx = oracle::rad(1) * 6378137.0 * std::cos(oracle::rad(c.center.lat)), ky = oracle::rad(1) * 6378137.0;
    for (std::size_t i = 1; i < line.size(); ++i) {
      const double ax = (line[i - 1].lon - c.center.lon) * kx, ay = (line[i - 1].lat - c.center.lat) * ky;
      const double bx = (line[i].lon - c.center.lon) * kx, by = (line[i].lat - c.center.lat) * ky;
      const double len2 = (bx - ax) * (bx - ax) + (by - ay) * (by - ay);
      const double t = len2 > 0 ? std::clamp(-(ax * (bx - ax) + ay * (by - ay)) / len2, 0.0, 1.0) : 0.0;
      if (std::hypot(ax + t * (bx - ax), ay + t * (by - ay)) <= c.radius_m) return true;
    }
  }
  return false;
}

}  // namespace testing
