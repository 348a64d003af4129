#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <vector>

#include "leafsurf/common.hpp"

namespace leafsurf {

struct Triangulation2D {
  std::vector<Vec2> points;
  std::vector<std::array<int, 3>> triangles;  // vertex indices, sorted per triangle
};

namespace detail {

inline double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

/// > 0 if d lies inside the circumcircle of ccw triangle (a, b, c).
inline double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double ad2 = adx * adx + ady * ady;
  const double bd2 = bdx * bdx + bdy * bdy;
  const double cd2 = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd2 - bd2 * cdy) - ady * (bdx * cd2 - bd2 * cdx) +
         ad2 * (bdx * cdy - bdy * cdx);
}

struct BWTriangle {
  int v[3];
  int nbr[3];  // nbr[i] is across the edge opposite v[i]
  bool alive = true;
};

}  // namespace detail

/// Circumcircle of a triangle; used for the alpha-shape filter.
inline std::pair<Vec2, double> circumcircle(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 ab = b - a, ac = c - a;
  const double d = 2.0 * (ab.x() * ac.y() - ab.y() * ac.x());
  if (d == 0.0) return {a, std::numeric_limits<double>::infinity()};
  const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
  const Vec2 center = a + Vec2(ac.y() * ab2 - ab.y() * ac2, ab.x() * ac2 - ac.x() * ab2) / d;
  return {center, (center - a).norm()};
}

/// Incremental Bowyer-Watson Delaunay triangulation with walk-based point
/// location and tolerance-based in-circle tests.
inline Triangulation2D delaunay2d(std::vector<Vec2> input) {
  using detail::BWTriangle;
  using detail::incircle;
  using detail::orient2d;

  if (input.size() < 3) throw Error("delaunay2d: needs at least 3 points");
  const BoundingBox<2> box = bounding_box<2>(std::span<const Vec2>(input));
  const double extent = std::max(box.diagonal(), 1e-300);
  const double dup_tol2 = 1e-24 * extent * extent;

  // Working copy with three far-away enclosing vertices appended.
  std::vector<Vec2> pts = input;
  const int n = static_cast<int>(pts.size());
  const Vec2 c = box.center();
  const double s = 100.0 * extent;
  pts.push_back(c + Vec2(0.0, 3.0 * s));
  pts.push_back(c + Vec2(-3.0 * s, -2.0 * s));
  pts.push_back(c + Vec2(3.0 * s, -2.0 * s));

  std::vector<BWTriangle> tris;
  tris.push_back({{n, n + 1, n + 2}, {-1, -1, -1}, true});
  int last = 0;

  const double orient_eps = 1e-12 * extent * extent;

  auto locate = [&](const Vec2& p) -> int {
    int t = last;
    for (int steps = 0; steps < 4 * static_cast<int>(tris.size()) + 16; ++steps) {
      if (!tris[t].alive) break;
      bool moved = false;
      for (int i = 0; i < 3; ++i) {
        const Vec2& e0 = pts[tris[t].v[(i + 1) % 3]];
        const Vec2& e1 = pts[tris[t].v[(i + 2) % 3]];
        if (orient2d(e0, e1, p) < -orient_eps) {
          const int next = tris[t].nbr[i];
          if (next >= 0) {
            t = next;
            moved = true;
            break;
          }
        }
      }
      if (!moved) return t;
    }
    // Fallback: linear scan.
    for (int t2 = 0; t2 < static_cast<int>(tris.size()); ++t2) {
      if (!tris[t2].alive) continue;
      bool inside = true;
      for (int i = 0; i < 3 && inside; ++i) {
        const Vec2& e0 = pts[tris[t2].v[(i + 1) % 3]];
        const Vec2& e1 = pts[tris[t2].v[(i + 2) % 3]];
        if (orient2d(e0, e1, p) < -orient_eps) inside = false;
      }
      if (inside) return t2;
    }
    throw Error("delaunay2d: point location failed");
  };

  std::vector<int> cavity, stack;
  std::vector<char> in_cavity;

  for (int pi = 0; pi < n; ++pi) {
    const Vec2& p = pts[pi];
    bool dup = false;
    for (int pj = 0; pj < pi && !dup; ++pj)
      if ((pts[pj] - p).squaredNorm() <= dup_tol2) dup = true;
    if (dup) continue;

    const int start = locate(p);
    cavity.clear();
    stack.clear();
    in_cavity.assign(tris.size(), 0);
    stack.push_back(start);
    in_cavity[start] = 1;
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      cavity.push_back(t);
      for (int i = 0; i < 3; ++i) {
        const int nb = tris[t].nbr[i];
        if (nb < 0 || in_cavity[nb]) continue;
        const auto& nt = tris[nb];
        if (incircle(pts[nt.v[0]], pts[nt.v[1]], pts[nt.v[2]], p) > 0.0) {
          in_cavity[nb] = 1;
          stack.push_back(nb);
        }
      }
    }

    // Boundary edges of the cavity, oriented ccw around it.
    struct BEdge {
      int a, b, outer;
    };
    std::vector<BEdge> boundary;
    for (int t : cavity) {
      for (int i = 0; i < 3; ++i) {
        const int nb = tris[t].nbr[i];
        if (nb >= 0 && in_cavity[nb]) continue;
        boundary.push_back({tris[t].v[(i + 1) % 3], tris[t].v[(i + 2) % 3], nb});
      }
      tris[t].alive = false;
    }

    std::unordered_map<int, int> start_of, end_of;  // boundary vertex -> new tri
    std::vector<int> fresh;
    fresh.reserve(boundary.size());
    for (const auto& e : boundary) {
      BWTriangle nt;
      nt.v[0] = pi;
      nt.v[1] = e.a;
      nt.v[2] = e.b;
      nt.nbr[0] = e.outer;
      nt.nbr[1] = -1;
      nt.nbr[2] = -1;
      const int id = static_cast<int>(tris.size());
      tris.push_back(nt);
      fresh.push_back(id);
      start_of[e.a] = id;
      end_of[e.b] = id;
      if (e.outer >= 0) {
        for (int i = 0; i < 3; ++i) {
          const int oa = tris[e.outer].v[(i + 1) % 3];
          const int ob = tris[e.outer].v[(i + 2) % 3];
          if ((oa == e.a && ob == e.b) || (oa == e.b && ob == e.a))
            tris[e.outer].nbr[i] = id;
        }
      }
    }
    for (int id : fresh) {
      tris[id].nbr[1] = start_of.at(tris[id].v[2]);  // edge (b, p)
      tris[id].nbr[2] = end_of.at(tris[id].v[1]);    // edge (p, a)
    }
    last = fresh.front();
  }

  Triangulation2D out;
  out.points = std::move(input);
  for (const auto& t : tris) {
    if (!t.alive) continue;
    if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
    std::array<int, 3> tri = {t.v[0], t.v[1], t.v[2]};
    std::sort(tri.begin(), tri.end());
    out.triangles.push_back(tri);
  }
  std::sort(out.triangles.begin(), out.triangles.end());
  if (out.triangles.empty())
    throw Error("delaunay2d: all points collinear");
  return out;
}

/// Alpha shape: the Delaunay triangles with circumradius at most alpha,
/// with grid-bucketed point location.
class AlphaShape2D {
public:
  AlphaShape2D() = default;

  AlphaShape2D(const Triangulation2D& tri, double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0)) throw Error("alpha_shape: alpha must be positive");
    points_ = tri.points;
    for (const auto& t : tri.triangles) {
      const auto [cc, r] = circumcircle(points_[t[0]], points_[t[1]], points_[t[2]]);
      (void)cc;
      if (r <= alpha) triangles_.push_back(t);
    }
    build_grid();
  }

  bool contains(const Vec2& p) const {
    if (triangles_.empty()) return false;
    if (!grid_box_.contains(p)) return false;
    const std::size_t cx = cell_index(p.x() - grid_box_.lo[0]);
    const std::size_t cy = cell_index(p.y() - grid_box_.lo[1]);
    for (int idx : cells_[std::min(cy, ny_ - 1) * nx_ + std::min(cx, nx_ - 1)]) {
      if (point_in_triangle(p, triangles_[idx])) return true;
    }
    return false;
  }

  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  double alpha() const { return alpha_; }

private:
  bool point_in_triangle(const Vec2& p, const std::array<int, 3>& t) const {
    const Vec2& a = points_[t[0]];
    const Vec2& b = points_[t[1]];
    const Vec2& c = points_[t[2]];
    const double tol = -1e-12 * std::max(1.0, grid_box_.diagonal() * grid_box_.diagonal());
    double d1 = detail::orient2d(a, b, p);
    double d2 = detail::orient2d(b, c, p);
    double d3 = detail::orient2d(c, a, p);
    // sorted-index triangles have arbitrary orientation; accept either sign
    return (d1 >= tol && d2 >= tol && d3 >= tol) ||
           (d1 <= -tol && d2 <= -tol && d3 <= -tol);
  }

  std::size_t cell_index(double offset) const {
    const double v = offset / cell_;
    return v <= 0.0 ? 0 : static_cast<std::size_t>(v);
  }

  void build_grid() {
    if (triangles_.empty()) return;
    for (const auto& t : triangles_)
      for (int k = 0; k < 3; ++k) grid_box_.expand(points_[t[k]]);
    const std::size_t target =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(
                                      static_cast<double>(triangles_.size()))));
    nx_ = ny_ = target;
    cell_ = std::max({grid_box_.extent()[0] / static_cast<double>(nx_),
                      grid_box_.extent()[1] / static_cast<double>(ny_),
                      1e-300});
    nx_ = std::max<std::size_t>(1, static_cast<std::size_t>(
                                       std::ceil(grid_box_.extent()[0] / cell_)));
    ny_ = std::max<std::size_t>(1, static_cast<std::size_t>(
                                       std::ceil(grid_box_.extent()[1] / cell_)));
    cells_.assign(nx_ * ny_, {});
    for (int idx = 0; idx < static_cast<int>(triangles_.size()); ++idx) {
      BoundingBox<2> tb;
      for (int k = 0; k < 3; ++k) tb.expand(points_[triangles_[idx][k]]);
      const std::size_t x0 = std::min(cell_index(tb.lo[0] - grid_box_.lo[0]), nx_ - 1);
      const std::size_t x1 = std::min(cell_index(tb.hi[0] - grid_box_.lo[0]), nx_ - 1);
      const std::size_t y0 = std::min(cell_index(tb.lo[1] - grid_box_.lo[1]), ny_ - 1);
      const std::size_t y1 = std::min(cell_index(tb.hi[1] - grid_box_.lo[1]), ny_ - 1);
      for (std::size_t y = y0; y <= y1; ++y)
        for (std::size_t x = x0; x <= x1; ++x) cells_[y * nx_ + x].push_back(idx);
    }
  }

  std::vector<Vec2> points_;
  std::vector<std::array<int, 3>> triangles_;
  double alpha_ = 0.0;
  BoundingBox<2> grid_box_;
  double cell_ = 1.0;
  std::size_t nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> cells_;
};

inline AlphaShape2D alpha_shape(const Triangulation2D& tri, double alpha) {
  return AlphaShape2D(tri, alpha);
}

inline bool point_in_shape(const AlphaShape2D& shape, const Vec2& p) {
  return shape.contains(p);
}

/// Default alpha: 5x the median nearest-neighbour spacing of the sites.
/// The factor sits well above the largest sampling gaps of uniform random
/// inputs, so the shape tracks the outline without interior pinholes.
inline double default_alpha(std::span<const Vec2> pts) {
  if (pts.size() < 2) throw Error("default_alpha: needs at least 2 points");
  std::vector<double> nn(pts.size(), std::numeric_limits<double>::infinity());
  // Grid-accelerated nearest neighbour for large inputs would be nicer; the
  // quadratic scan is fine at the alpha-shape input sizes used here.
  const std::size_t n = pts.size();
  const std::size_t stride = n > 4000 ? n / 4000 : 1;
  std::vector<double> samples;
  for (std::size_t i = 0; i < n; i += stride) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      best = std::min(best, (pts[i] - pts[j]).squaredNorm());
    }
    samples.push_back(std::sqrt(best));
  }
  std::nth_element(samples.begin(), samples.begin() + samples.size() / 2, samples.end());
  return 5.0 * samples[samples.size() / 2];
}

}  // namespace leafsurf
