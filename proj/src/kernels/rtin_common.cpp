#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "citytwin/kernels.hpp"

namespace citytwin {

std::size_t rtin_parent_count(int side) {
  const std::size_t tile = static_cast<std::size_t>(side - 1);
  return tile * tile * 2 - 2;
}

// Triangle ids follow a binary heap: the two roots are 2 and 3, children of
// id are 2*id and 2*id+1. Walking the id's bits from the top replays the
// splits that produced it.
RtinTriangle rtin_triangle(std::size_t index, int tile_size) {
  std::size_t id = index + 2;
  int ax = 0, ay = 0, bx = 0, by = 0, cx = 0, cy = 0;
  if (id & 1) {
    bx = by = cx = tile_size;
  } else {
    ax = ay = cy = tile_size;
  }
  while ((id >>= 1) > 1) {
    const int mx = (ax + bx) >> 1;
    const int my = (ay + by) >> 1;
    if (id & 1) {
      bx = ax, by = ay;
      ax = cx, ay = cy;
    } else {
      ax = bx, ay = by;
      bx = cx, by = cy;
    }
    cx = mx, cy = my;
  }
  return {ax, ay, bx, by, cx, cy};
}

double rtin_deviation(std::span<const float> heights, int side, const RtinTriangle& t) {
  const long long area2 =
      static_cast<long long>(t.bx - t.ax) * (t.cy - t.ay) - static_cast<long long>(t.by - t.ay) * (t.cx - t.ax);
  if (area2 == 0) return 0.0;
  const double ha = heights[static_cast<std::size_t>(t.ay) * side + t.ax];
  const double hb = heights[static_cast<std::size_t>(t.by) * side + t.bx];
  const double hc = heights[static_cast<std::size_t>(t.cy) * side + t.cx];
  const int x0 = std::min({t.ax, t.bx, t.cx}), x1 = std::max({t.ax, t.bx, t.cx});
  const int y0 = std::min({t.ay, t.by, t.cy}), y1 = std::max({t.ay, t.by, t.cy});

  double worst = 0.0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      // Edge functions; the sample is inside when none has the wrong sign.
      const long long wa = static_cast<long long>(t.cx - t.bx) * (y - t.by) - static_cast<long long>(t.cy - t.by) * (x - t.bx);
      const long long wb = static_cast<long long>(t.ax - t.cx) * (y - t.cy) - static_cast<long long>(t.ay - t.cy) * (x - t.cx);
      const long long wc = static_cast<long long>(t.bx - t.ax) * (y - t.ay) - static_cast<long long>(t.by - t.ay) * (x - t.ax);
      const bool inside = area2 > 0 ? (wa >= 0 && wb >= 0 && wc >= 0) : (wa <= 0 && wb <= 0 && wc <= 0);
      if (!inside) continue;
      const double plane = (wa * ha + wb * hb + wc * hc) / static_cast<double>(area2);
      const double h = heights[static_cast<std::size_t>(y) * side + x];
      worst = std::max(worst, std::abs(h - plane));
    }
  }
  return worst;
}

}  // namespace citytwin
