#include "citytwin/city_builder.hpp"

#include <omp.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include "json.hpp"
#include <random>
#include <set>
#include <spdlog/spdlog.h>

#include "citytwin/error.hpp"

namespace citytwin {

// ---------------------------------------------------------------------------
// Mesh checks

double Mesh::signed_volume() const {
  double six_v = 0.0;
  for (const auto& t : triangles) {
    const Vec3& a = vertices[t[0]];
    const Vec3& b = vertices[t[1]];
    const Vec3& c = vertices[t[2]];
    six_v += a.x * (b.y * c.z - b.z * c.y) - a.y * (b.x * c.z - b.z * c.x) + a.z * (b.x * c.y - b.y * c.x);
  }
  return six_v / 6.0;
}

bool Mesh::is_closed_manifold() const {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : triangles)
    for (int k = 0; k < 3; ++k) ++directed[{t[k], t[(k + 1) % 3]}];
  for (const auto& [edge, count] : directed) {
    if (count != 1) return false;
    const auto back = directed.find({edge.second, edge.first});
    if (back == directed.end() || back->second != 1) return false;
  }
  return true;
}

std::string to_string(Lod lod) {
  switch (lod) {
    case Lod::lod1: return "LoD1";
    case Lod::lod3: return "LoD3";
    case Lod::custom: return "custom";
  }
  return "custom";
}

Lod lod_from_string(const std::string& s) {
  if (s == "LoD1") return Lod::lod1;
  if (s == "LoD3") return Lod::lod3;
  if (s == "custom") return Lod::custom;
  throw Error(Errc::validation, "unknown LoD '" + s + "'");
}

// ---------------------------------------------------------------------------
// Triangulation

namespace {

bool same_point(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }

bool in_triangle_closed(Vec2 p, Vec2 a, Vec2 b, Vec2 c) {
  const double d1 = cross(b - a, p - a);
  const double d2 = cross(c - b, p - b);
  const double d3 = cross(a - c, p - c);
  const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
  const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
  return !(neg && pos);
}

double ring_area(std::span<const Vec2> pts, const std::vector<std::uint32_t>& idx) {
  std::vector<Vec2> ring;
  ring.reserve(idx.size());
  for (auto i : idx) ring.push_back(pts[i]);
  return signed_area(ring);
}

// Does segment p-q cross any edge of the closed index loop, ignoring edges
// that touch p or q?
bool crosses_loop(std::span<const Vec2> pts, const std::vector<std::uint32_t>& loop, Vec2 p, Vec2 q) {
  const std::size_t n = loop.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 a = pts[loop[k]];
    const Vec2 b = pts[loop[(k + 1) % n]];
    if (same_point(a, p) || same_point(a, q) || same_point(b, p) || same_point(b, q)) continue;
    if (segments_intersect(p, q, a, b)) return true;
  }
  return false;
}

bool inside_loop(std::span<const Vec2> pts, const std::vector<std::uint32_t>& loop, Vec2 p) {
  std::vector<Vec2> ring;
  for (auto i : loop) ring.push_back(pts[i]);
  return point_in_ring(p, ring);
}

}  // namespace

std::vector<std::array<std::uint32_t, 3>> triangulate_polygon(std::span<const Vec2> outer,
                                                              std::span<const std::vector<Vec2>> holes) {
  std::vector<Vec2> pts(outer.begin(), outer.end());
  std::vector<std::uint32_t> poly(outer.size());
  for (std::uint32_t i = 0; i < poly.size(); ++i) poly[i] = i;
  if (poly.size() < 3) throw Error(Errc::geometry, "polygon needs at least 3 vertices");
  if (ring_area(pts, poly) < 0) std::reverse(poly.begin(), poly.end());

  std::vector<std::vector<std::uint32_t>> hole_loops;
  for (const auto& h : holes) {
    std::vector<std::uint32_t> loop;
    for (const auto& p : h) {
      loop.push_back(static_cast<std::uint32_t>(pts.size()));
      pts.push_back(p);
    }
    if (loop.size() < 3) continue;
    if (ring_area(pts, loop) > 0) std::reverse(loop.begin(), loop.end());
    hole_loops.push_back(std::move(loop));
  }

  // Bridge holes into the outer loop, rightmost hole first, each through the
  // nearest outer vertex that is visible from the hole's rightmost vertex.
  std::sort(hole_loops.begin(), hole_loops.end(), [&](const auto& a, const auto& b) {
    auto max_x = [&](const auto& l) {
      double m = -std::numeric_limits<double>::infinity();
      for (auto i : l) m = std::max(m, pts[i].x);
      return m;
    };
    return max_x(a) > max_x(b);
  });
  for (std::size_t h = 0; h < hole_loops.size(); ++h) {
    auto& hole = hole_loops[h];
    const auto m_it = std::max_element(hole.begin(), hole.end(), [&](auto a, auto b) {
      return pts[a].x < pts[b].x || (pts[a].x == pts[b].x && pts[a].y > pts[b].y);
    });
    std::rotate(hole.begin(), m_it, hole.end());
    const Vec2 m = pts[hole[0]];

    std::size_t best = poly.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Vec2 v = pts[poly[k]];
      const double d = std::hypot(v.x - m.x, v.y - m.y);
      if (d >= best_d) continue;
      if (crosses_loop(pts, poly, m, v)) continue;
      bool blocked = false;
      for (std::size_t o = h; o < hole_loops.size() && !blocked; ++o) blocked = crosses_loop(pts, hole_loops[o], m, v);
      if (blocked) continue;
      const Vec2 mid = 0.5 * (m + v);
      if (!inside_loop(pts, poly, mid)) continue;
      bool in_other = false;
      for (std::size_t o = h; o < hole_loops.size() && !in_other; ++o) in_other = inside_loop(pts, hole_loops[o], mid);
      if (in_other) continue;
      best = k;
      best_d = d;
    }
    if (best == poly.size()) throw Error(Errc::geometry, "cannot bridge hole into outer ring");
    std::vector<std::uint32_t> splice(hole.begin(), hole.end());
    splice.push_back(hole[0]);
    splice.push_back(poly[best]);
    poly.insert(poly.begin() + static_cast<std::ptrdiff_t>(best) + 1, splice.begin(), splice.end());
  }

  std::vector<std::array<std::uint32_t, 3>> tris;
  auto find_ear = [&](bool allow_flat) -> std::size_t {
    const std::size_t n = poly.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 a = pts[poly[(k + n - 1) % n]];
      const Vec2 b = pts[poly[k]];
      const Vec2 c = pts[poly[(k + 1) % n]];
      const double turn = cross(b - a, c - b);
      if (allow_flat ? turn < 0 : turn <= 0) continue;
      bool clear = true;
      for (std::size_t q = 0; q < n && clear; ++q) {
        if (q == k || q == (k + n - 1) % n || q == (k + 1) % n) continue;
        const Vec2 p = pts[poly[q]];
        if (same_point(p, a) || same_point(p, b) || same_point(p, c)) continue;
        if (in_triangle_closed(p, a, b, c)) clear = false;
      }
      if (clear) return k;
    }
    return n;
  };
  while (poly.size() > 3) {
    std::size_t k = find_ear(false);
    if (k == poly.size()) k = find_ear(true);
    if (k == poly.size()) throw Error(Errc::geometry, "ear clipping found no ear (self-intersecting ring?)");
    const std::size_t n = poly.size();
    tris.push_back({poly[(k + n - 1) % n], poly[k], poly[(k + 1) % n]});
    poly.erase(poly.begin() + static_cast<std::ptrdiff_t>(k));
  }
  tris.push_back({poly[0], poly[1], poly[2]});
  return tris;
}

// ---------------------------------------------------------------------------
// Extrusion

namespace {

std::vector<Vec2> clean_ring(std::vector<Vec2> ring) {
  bool changed = true;
  while (changed && ring.size() >= 3) {
    changed = false;
    for (std::size_t k = 0; k < ring.size() && ring.size() >= 3; ++k) {
      const std::size_t n = ring.size();
      const Vec2 a = ring[(k + n - 1) % n];
      const Vec2 b = ring[k];
      const Vec2 c = ring[(k + 1) % n];
      const double span = std::hypot(c.x - a.x, c.y - a.y);
      const bool duplicate = std::hypot(b.x - a.x, b.y - a.y) < 1e-9;
      const bool collinear = std::abs(cross(b - a, c - a)) <= 1e-12 * std::max(span * span, 1e-12) &&
                             dot(b - a, c - b) >= 0;
      if (duplicate || collinear) {
        ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(k));
        changed = true;
        --k;
      }
    }
  }
  return ring;
}

bool self_intersects(const std::vector<Vec2>& ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n])) return true;
    }
  }
  return false;
}

std::vector<Vec2> to_local_ring(const LocalFrame& frame, const std::vector<GeoPoint>& ring) {
  std::vector<Vec2> out;
  for (const auto& p : open_ring(ring)) out.push_back(frame.to_local(p));
  return out;
}

}  // namespace

BuildingModel extrude_flat(const Footprint& f, double height, double ground_elevation) {
  if (!(height > 0) || !std::isfinite(height)) throw Error(Errc::range, "extrusion height must be positive");
  const GeoPoint anchor = footprint_centroid(f.polygon);
  const LocalFrame frame(anchor);

  auto outer = clean_ring(to_local_ring(frame, f.polygon.outer));
  if (outer.size() < 3 || std::abs(signed_area(outer)) < 1e-6)
    throw Error(Errc::geometry, "footprint " + f.id + " is degenerate");
  if (self_intersects(outer)) throw Error(Errc::geometry, "footprint " + f.id + " outer ring self-intersects");
  if (signed_area(outer) < 0) std::reverse(outer.begin(), outer.end());

  std::vector<std::vector<Vec2>> holes;
  for (const auto& h : f.polygon.holes) {
    auto ring = clean_ring(to_local_ring(frame, h));
    if (ring.size() < 3 || std::abs(signed_area(ring)) < 1e-6 || self_intersects(ring)) continue;
    if (signed_area(ring) > 0) std::reverse(ring.begin(), ring.end());
    holes.push_back(std::move(ring));
  }

  const auto cap = triangulate_polygon(outer, holes);

  BuildingModel model;
  model.building_id = f.id;
  model.anchor = anchor;
  model.ground_elevation = ground_elevation;
  model.base_elevation = ground_elevation;
  model.height = height;

  std::vector<const std::vector<Vec2>*> rings{&outer};
  for (const auto& h : holes) rings.push_back(&h);
  std::size_t ring_total = 0;
  for (const auto* r : rings) ring_total += r->size();
  const auto top = static_cast<std::uint32_t>(ring_total);

  auto& mesh = model.mesh;
  for (double z : {0.0, height})
    for (const auto* r : rings)
      for (const auto& p : *r) mesh.vertices.push_back({p.x, p.y, z});

  for (const auto& t : cap) {
    mesh.triangles.push_back({t[0] + top, t[1] + top, t[2] + top});
    mesh.triangles.push_back({t[2], t[1], t[0]});
  }
  std::uint32_t first = 0;
  for (const auto* r : rings) {
    const auto n = static_cast<std::uint32_t>(r->size());
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t j = (i + 1) % n;
      mesh.triangles.push_back({first + i, first + j, top + first + j});
      mesh.triangles.push_back({first + i, top + first + j, top + first + i});
    }
    first += n;
  }
  return model;
}

// ---------------------------------------------------------------------------
// Heights from rasters

std::vector<Vec3> dsm_samples_in(const Footprint& f, const MergedTerrain& dsm, const GeoPoint& anchor) {
  const LocalFrame frame(anchor);
  const GeoBBox box = f.polygon.bbox();
  std::vector<std::size_t> order(dsm.grids().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return dsm.grids()[a].priority > dsm.grids()[b].priority; });

  for (auto gi : order) {
    const auto& g = dsm.grids()[gi];
    if (!g.bbox().intersects(box)) continue;
    const int i0 = std::max(0, static_cast<int>(std::floor((box.min_lon - g.west) / g.dx)));
    const int i1 = std::min(g.width - 1, static_cast<int>(std::ceil((box.max_lon - g.west) / g.dx)));
    const int j0 = std::max(0, static_cast<int>(std::floor((g.north - box.max_lat) / g.dy)));
    const int j1 = std::min(g.height - 1, static_cast<int>(std::ceil((g.north - box.min_lat) / g.dy)));
    std::vector<Vec3> out;
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const float v = g.at(i, j);
        if (g.is_nodata(v)) continue;
        const GeoPoint p = g.position(i, j);
        if (!point_in_polygon(p, f.polygon)) continue;
        const Vec2 l = frame.to_local(p);
        out.push_back({l.x, l.y, v});
      }
    }
    if (!out.empty()) return out;
  }
  return {};
}

double height_from_dsm(const Footprint& f, const MergedTerrain& dsm, const MergedTerrain& dtm) {
  if (f.height_override) return *f.height_override;
  const GeoPoint anchor = footprint_centroid(f.polygon);
  const LocalFrame frame(anchor);
  const auto samples = dsm_samples_in(f, dsm, anchor);
  double surface = 0.0, terrain = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    const auto ground = dtm.sample(frame.to_geo({s.x, s.y}));
    if (!ground) continue;
    surface += s.z;
    terrain += *ground;
    ++n;
  }
  if (n == 0) throw Error(Errc::insufficient_data, "no DSM/DTM samples inside footprint " + f.id);
  return (surface - terrain) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Roof planes

namespace {

struct PlaneFit {
  Eigen::Vector3d normal;
  double offset = 0.0;
};

std::optional<PlaneFit> plane_through(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Eigen::Vector3d pa(a.x, a.y, a.z), pb(b.x, b.y, b.z), pc(c.x, c.y, c.z);
  Eigen::Vector3d n = (pb - pa).cross(pc - pa);
  const double len = n.norm();
  if (len < 1e-9) return std::nullopt;
  n /= len;
  if (n.z() < 0) n = -n;
  if (n.z() < 1e-3) return std::nullopt;  // vertical: a wall, not a roof
  return PlaneFit{n, n.dot(pa)};
}

// Total least squares: normal is the covariance eigenvector with the
// smallest eigenvalue.
std::optional<PlaneFit> refit(std::span<const Vec3> samples, const std::vector<std::size_t>& members) {
  if (members.size() < 3) return std::nullopt;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (auto i : members) mean += Eigen::Vector3d(samples[i].x, samples[i].y, samples[i].z);
  mean /= static_cast<double>(members.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (auto i : members) {
    const Eigen::Vector3d d = Eigen::Vector3d(samples[i].x, samples[i].y, samples[i].z) - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
  if (n.z() < 0) n = -n;
  if (n.z() < 1e-3) return std::nullopt;
  return PlaneFit{n, n.dot(mean)};
}

std::vector<std::size_t> inliers_of(std::span<const Vec3> samples, const std::vector<std::size_t>& pool,
                                    const PlaneFit& plane, double tol) {
  std::vector<std::size_t> out;
  for (auto i : pool) {
    const double d = plane.normal.x() * samples[i].x + plane.normal.y() * samples[i].y +
                     plane.normal.z() * samples[i].z - plane.offset;
    if (std::abs(d) <= tol) out.push_back(i);
  }
  return out;
}

RoofPlane to_roof(const PlaneFit& p, std::size_t inliers) {
  RoofPlane r;
  r.normal = {p.normal.x(), p.normal.y(), p.normal.z()};
  r.offset = p.offset;
  r.inliers = inliers;
  return r;
}

}  // namespace

std::vector<RoofPlane> fit_roof_planes(std::span<const Vec3> samples, double inlier_tol, std::size_t min_support,
                                       std::uint64_t seed) {
  constexpr int kIterations = 500;
  min_support = std::max<std::size_t>(min_support, 3);
  auto flat_fallback = [&] {
    RoofPlane flat;
    flat.fallback = true;
    flat.inliers = samples.size();
    double sum = 0.0;
    for (const auto& s : samples) sum += s.z;
    flat.offset = samples.empty() ? 0.0 : sum / static_cast<double>(samples.size());
    return std::vector<RoofPlane>{flat};
  };
  if (samples.size() < min_support) return flat_fallback();

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> remaining(samples.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;

  std::vector<RoofPlane> planes;
  while (remaining.size() >= min_support) {
    std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
    std::optional<PlaneFit> best;
    std::size_t best_count = 0;
    for (int it = 0; it < kIterations; ++it) {
      const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
      if (a == b || b == c || a == c) continue;
      const auto cand = plane_through(samples[remaining[a]], samples[remaining[b]], samples[remaining[c]]);
      if (!cand) continue;
      const std::size_t count = inliers_of(samples, remaining, *cand, inlier_tol).size();
      if (count > best_count) {
        best_count = count;
        best = cand;
      }
    }
    if (!best || best_count < min_support) break;

    auto members = inliers_of(samples, remaining, *best, inlier_tol);
    for (int round = 0; round < 3; ++round) {
      const auto fitted = refit(samples, members);
      if (!fitted) break;
      auto again = inliers_of(samples, remaining, *fitted, inlier_tol);
      if (again.size() < members.size()) break;
      best = fitted;
      if (again == members) break;
      members = std::move(again);
    }
    planes.push_back(to_roof(*best, members.size()));
    std::vector<std::size_t> rest;
    std::set_difference(remaining.begin(), remaining.end(), members.begin(), members.end(), std::back_inserter(rest));
    remaining = std::move(rest);
  }
  if (planes.empty()) return flat_fallback();
  return planes;
}

// ---------------------------------------------------------------------------
// Tileset

std::size_t Tileset::building_count() const {
  std::size_t n = 0;
  for (const auto& [tile, models] : tiles) n += models.size();
  return n;
}

Tileset build_tileset(std::span<const Footprint> footprints, const MergedTerrain* dsm, const MergedTerrain& dtm,
                      const BuildOptions& options) {
  struct Outcome {
    std::optional<BuildingModel> model;
    TileId tile;
    std::string error;
  };
  std::vector<Outcome> outcomes(footprints.size());

  const auto count = static_cast<std::ptrdiff_t>(footprints.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const Footprint& f = footprints[k];
    Outcome& out = outcomes[k];
    try {
      const GeoPoint anchor = footprint_centroid(f.polygon);
      out.tile = tile_for_point(anchor, options.zoom);
      double height = options.default_height_m;
      if (f.height_override) {
        height = *f.height_override;
      } else if (dsm && !dsm->empty()) {
        try {
          height = height_from_dsm(f, *dsm, dtm);
        } catch (const Error& e) {
          if (e.code() != Errc::insufficient_data) throw;
        }
      }
      if (!(height > 0)) throw Error(Errc::range, "non-positive building height " + std::to_string(height));
      const double ground = dtm.sample(anchor).value_or(0.0);
      double base = ground;
      for (const auto& p : f.polygon.outer)
        if (auto t = dtm.sample(p)) base = std::max(base, *t);
      BuildingModel model = extrude_flat(f, height, ground);
      model.base_elevation = base;
      if (dsm && !dsm->empty() && !f.height_override) {
        auto samples = dsm_samples_in(f, *dsm, anchor);
        if (samples.size() >= options.roof_min_support)
          model.roof_planes = fit_roof_planes(samples, options.roof_inlier_tol_m, options.roof_min_support);
      }
      out.model = std::move(model);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  }

  Tileset result;
  std::set<std::string> seen;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    auto& out = outcomes[k];
    if (!out.model) {
      spdlog::warn("skipping footprint {}: {}", footprints[k].id, out.error);
      result.failures.push_back({footprints[k].id, out.error});
      continue;
    }
    if (!seen.insert(footprints[k].id).second) {
      result.failures.push_back({footprints[k].id, "duplicate footprint id"});
      continue;
    }
    result.tiles[out.tile].push_back(std::move(*out.model));
  }
  for (auto& [tile, models] : result.tiles)
    std::sort(models.begin(), models.end(),
              [](const BuildingModel& a, const BuildingModel& b) { return a.building_id < b.building_id; });
  return result;
}

// ---------------------------------------------------------------------------
// glTF binary

std::vector<std::uint8_t> encode_glb(const BuildingModel& model) {
  const auto& mesh = model.mesh;
  std::vector<float> positions;
  positions.reserve(mesh.vertices.size() * 3);
  float lo[3] = {std::numeric_limits<float>::max(), std::numeric_limits<float>::max(),
                 std::numeric_limits<float>::max()};
  float hi[3] = {std::numeric_limits<float>::lowest(), std::numeric_limits<float>::lowest(),
                 std::numeric_limits<float>::lowest()};
  for (const auto& v : mesh.vertices) {
    const float p[3] = {static_cast<float>(v.x), static_cast<float>(v.z), static_cast<float>(-v.y)};
    for (int k = 0; k < 3; ++k) {
      positions.push_back(p[k]);
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  }
  std::vector<std::uint32_t> indices;
  for (const auto& t : mesh.triangles) indices.insert(indices.end(), t.begin(), t.end());

  const std::size_t pos_bytes = positions.size() * 4;
  const std::size_t idx_bytes = indices.size() * 4;
  std::vector<std::uint8_t> bin(pos_bytes + idx_bytes);
  std::memcpy(bin.data(), positions.data(), pos_bytes);
  std::memcpy(bin.data() + pos_bytes, indices.data(), idx_bytes);

  nlohmann::json planes = nlohmann::json::array();
  for (const auto& p : model.roof_planes)
    planes.push_back({{"normal", {p.normal.x, p.normal.y, p.normal.z}}, {"offset", p.offset}, {"inliers", p.inliers}});
  nlohmann::json doc = {
      {"asset", {{"version", "2.0"}, {"generator", "citytwin"}}},
      {"scene", 0},
      {"scenes", {{{"nodes", {0}}}}},
      {"nodes",
       {{{"mesh", 0},
         {"name", model.building_id},
         {"extras",
          {{"building_id", model.building_id},
           {"variant", model.variant_id},
           {"lod", to_string(model.lod)},
           {"anchor", {model.anchor.lon, model.anchor.lat}},
           {"ground_elevation", model.ground_elevation},
           {"base_elevation", model.base_elevation},
           {"height", model.height},
           {"roof_planes", planes}}}}}},
      {"meshes", {{{"primitives", {{{"attributes", {{"POSITION", 0}}}, {"indices", 1}, {"mode", 4}}}}}}},
      {"accessors",
       {{{"bufferView", 0},
         {"componentType", 5126},
         {"count", mesh.vertices.size()},
         {"type", "VEC3"},
         {"min", {lo[0], lo[1], lo[2]}},
         {"max", {hi[0], hi[1], hi[2]}}},
        {{"bufferView", 1}, {"componentType", 5125}, {"count", indices.size()}, {"type", "SCALAR"}}}},
      {"bufferViews",
       {{{"buffer", 0}, {"byteOffset", 0}, {"byteLength", pos_bytes}, {"target", 34962}},
        {{"buffer", 0}, {"byteOffset", pos_bytes}, {"byteLength", idx_bytes}, {"target", 34963}}}},
      {"buffers", {{{"byteLength", bin.size()}}}},
  };
  std::string json = doc.dump();
  while (json.size() % 4) json.push_back(' ');
  while (bin.size() % 4) bin.push_back(0);

  std::vector<std::uint8_t> out;
  auto put32 = [&](std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  };
  put32(0x46546C67);  // "glTF"
  put32(2);
  put32(static_cast<std::uint32_t>(12 + 8 + json.size() + 8 + bin.size()));
  put32(static_cast<std::uint32_t>(json.size()));
  put32(0x4E4F534A);  // "JSON"
  out.insert(out.end(), json.begin(), json.end());
  put32(static_cast<std::uint32_t>(bin.size()));
  put32(0x004E4942);  // "BIN\0"
  out.insert(out.end(), bin.begin(), bin.end());
  return out;
}

// ---------------------------------------------------------------------------
// Variants

namespace {
bool valid_id(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_' || c == '.';
  });
}
}  // namespace

std::string VariantRegistry::blob_id_for(const std::string& building_id, const std::string& variant_id) {
  return building_id + "." + variant_id;
}

void VariantRegistry::add_building(const std::string& building_id) {
  std::unique_lock lock(mutex_);
  variants_.try_emplace(building_id);
}

bool VariantRegistry::has_building(const std::string& building_id) const {
  std::shared_lock lock(mutex_);
  return variants_.count(building_id) != 0;
}

VariantRegistry::Variant VariantRegistry::register_variant(const std::string& building_id,
                                                           const std::string& variant_id,
                                                           std::vector<std::uint8_t> blob, Lod lod) {
  if (!valid_id(variant_id) || !valid_id(building_id))
    throw Error(Errc::validation, "ids may only contain [A-Za-z0-9._-]");
  if (variant_id == "lod1") throw Error(Errc::validation, "variant id 'lod1' is reserved for the generated model");
  std::unique_lock lock(mutex_);
  auto it = variants_.find(building_id);
  if (it == variants_.end()) throw Error(Errc::not_found, "unknown building " + building_id);
  Variant v{variant_id, blob_id_for(building_id, variant_id), lod};
  it->second[variant_id] = v;
  blobs_[v.blob_id] = std::move(blob);
  return v;
}

std::vector<VariantRegistry::Variant> VariantRegistry::list_variants(const std::string& building_id) const {
  std::shared_lock lock(mutex_);
  auto it = variants_.find(building_id);
  if (it == variants_.end()) throw Error(Errc::not_found, "unknown building " + building_id);
  std::vector<Variant> out{{"lod1", blob_id_for(building_id, "lod1"), Lod::lod1}};
  for (const auto& [id, v] : it->second) out.push_back(v);
  return out;
}

const std::vector<std::uint8_t>* VariantRegistry::blob(const std::string& blob_id) const {
  std::shared_lock lock(mutex_);
  auto it = blobs_.find(blob_id);
  return it == blobs_.end() ? nullptr : &it->second;
}

std::vector<std::pair<std::string, VariantRegistry::Variant>> VariantRegistry::all() const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<std::string, Variant>> out;
  for (const auto& [b, vs] : variants_)
    for (const auto& [id, v] : vs) out.emplace_back(b, v);
  return out;
}

}  // namespace citytwin
