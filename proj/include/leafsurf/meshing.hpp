#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include <omp.h>

#include "leafsurf/common.hpp"
#include "leafsurf/mesh.hpp"
#include "leafsurf/reconstruction.hpp"

namespace leafsurf {

/// Axis-aligned evaluation lattice with isotropic spacing h.
struct Lattice {
  Vec3 origin = Vec3::Zero();
  double h = 1.0;
  std::array<int, 3> dims = {2, 2, 2};  // number of lattice points per axis

  Vec3 point(int i, int j, int k) const {
    return origin + h * Vec3(i, j, k);
  }
  std::uint64_t id(int i, int j, int k) const {
    return (static_cast<std::uint64_t>(k) * dims[1] + j) * dims[0] + i;
  }
};

using ScalarField = std::function<double(const Vec3&)>;
using PointMask = std::function<bool(const Vec3&)>;  // true = evaluate

namespace detail {

// The six tetrahedra of a cube sharing the main diagonal (0,0,0)-(1,1,1):
// one per permutation of the axis order walked from corner 0 to corner 7.
// Corners are indexed by bits (x | y<<1 | z<<2).
inline constexpr std::array<std::array<int, 4>, 6> kCubeTets = {{
    {0, 1, 3, 7},  // +x, +y, +z
    {0, 1, 5, 7},  // +x, +z, +y
    {0, 2, 3, 7},  // +y, +x, +z
    {0, 2, 6, 7},  // +y, +z, +x
    {0, 4, 5, 7},  // +z, +x, +y
    {0, 4, 6, 7},  // +z, +y, +x
}};

struct EdgeKeyHash {
  std::size_t operator()(const std::uint64_t& k) const noexcept {
    std::uint64_t x = k;
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return static_cast<std::size_t>(x);
  }
};

}  // namespace detail

/// Marching tetrahedra over a lattice: each cube is split into 6 tetrahedra
/// with a globally consistent main diagonal, iso-crossings are placed by
/// linear interpolation, and vertices are welded along shared lattice
/// edges. Masked lattice points are never evaluated and any tetrahedron
/// touching one is discarded. Field evaluation is parallel per lattice
/// plane; assembly order is deterministic.
inline TriangleMesh marching_tetrahedra(const ScalarField& field, const Lattice& grid,
                                        double iso, const PointMask& mask = {}) {
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  if (nx < 2 || ny < 2 || nz < 2)
    throw Error("marching_tetrahedra: lattice needs at least 2 points per axis");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double pert = 1e-12 * (1.0 + std::abs(iso));

  auto eval_plane = [&](int k, std::vector<double>& plane) {
    plane.assign(static_cast<std::size_t>(nx) * ny, nan);
    std::string err;
#pragma omp parallel for schedule(dynamic, 4)
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const Vec3 p = grid.point(i, j, k);
        if (mask && !mask(p)) continue;
        try {
          double v = field(p);
          if (v == iso) v += pert;  // symbolic perturbation, deterministic
          plane[static_cast<std::size_t>(j) * nx + i] = v;
        } catch (const std::exception& e) {
#pragma omp critical
          if (err.empty())
            err = "marching_tetrahedra: field error at lattice point (" +
                  std::to_string(i) + "," + std::to_string(j) + "," +
                  std::to_string(k) + "): " + e.what();
        }
      }
    }
    if (!err.empty()) throw Error(err);
  };

  TriangleMesh mesh;
  mesh.provenance = MeshProvenance::Implicit;
  std::unordered_map<std::uint64_t, std::uint32_t, detail::EdgeKeyHash> edge_vertex;
  // Lattice ids fit in 27 bits at the scales used here; pack an edge as two ids.
  auto edge_key = [&](std::uint64_t a, std::uint64_t b) {
    if (a > b) std::swap(a, b);
    return (a << 32) | b;
  };

  std::vector<double> planes[2];
  eval_plane(0, planes[0]);

  std::array<std::uint64_t, 8> cid;
  std::array<Vec3, 8> cpos;
  std::array<double, 8> cval;

  for (int k = 0; k + 1 < nz; ++k) {
    eval_plane(k + 1, planes[(k + 1) & 1]);
    const std::vector<double>& lower = planes[k & 1];
    const std::vector<double>& upper = planes[(k + 1) & 1];

    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        for (int corner = 0; corner < 8; ++corner) {
          const int ci = i + (corner & 1);
          const int cj = j + ((corner >> 1) & 1);
          const int ck = k + ((corner >> 2) & 1);
          cid[corner] = grid.id(ci, cj, ck);
          cval[corner] = (ck == k ? lower : upper)[static_cast<std::size_t>(cj) * nx + ci];
          cpos[corner] = grid.point(ci, cj, ck);
        }

        for (const auto& tet : detail::kCubeTets) {
          bool usable = true;
          int npos = 0;
          for (int v : tet) {
            if (std::isnan(cval[v])) {
              usable = false;
              break;
            }
            if (cval[v] > iso) ++npos;
          }
          if (!usable || npos == 0 || npos == 4) continue;

          auto crossing = [&](int va, int vb) -> std::uint32_t {
            std::uint64_t a = cid[va], b = cid[vb];
            Vec3 pa = cpos[va], pb = cpos[vb];
            double fa = cval[va], fb = cval[vb];
            if (a > b) {
              std::swap(a, b);
              std::swap(pa, pb);
              std::swap(fa, fb);
            }
            double t = (iso - fa) / (fb - fa);
            // Crossings that land on a lattice point (the perturbed
            // exactly-iso case) are welded per point, not per edge, so the
            // collapsed triangles around them drop out without opening the
            // surface.
            std::uint64_t key;
            Vec3 position;
            if (t < 1e-9) {
              key = edge_key(a, a);
              position = pa;
            } else if (t > 1.0 - 1e-9) {
              key = edge_key(b, b);
              position = pb;
            } else {
              key = edge_key(a, b);
              position = pa + t * (pb - pa);
            }
            auto it = edge_vertex.find(key);
            if (it != edge_vertex.end()) return it->second;
            const std::uint32_t idx = static_cast<std::uint32_t>(mesh.vertices.size());
            mesh.vertices.push_back(position);
            edge_vertex.emplace(key, idx);
            return idx;
          };

          std::array<int, 4> pos, neg;
          int np = 0, nn = 0;
          for (int v : tet) (cval[v] > iso ? pos[np++] : neg[nn++]) = v;

          if (np == 1) {
            mesh.triangles.push_back({crossing(pos[0], neg[0]), crossing(pos[0], neg[1]),
                                      crossing(pos[0], neg[2])});
          } else if (np == 3) {
            mesh.triangles.push_back({crossing(neg[0], pos[0]), crossing(neg[0], pos[1]),
                                      crossing(neg[0], pos[2])});
          } else {  // 2 / 2 -> quad
            const std::uint32_t v00 = crossing(pos[0], neg[0]);
            const std::uint32_t v01 = crossing(pos[0], neg[1]);
            const std::uint32_t v11 = crossing(pos[1], neg[1]);
            const std::uint32_t v10 = crossing(pos[1], neg[0]);
            mesh.triangles.push_back({v00, v01, v11});
            mesh.triangles.push_back({v00, v11, v10});
          }
        }
      }
    }
  }
  mesh.remove_degenerate_triangles();
  return mesh;
}

/// Samples the macro height map on a regular (y1,y2) grid clipped by its
/// alpha shape and transforms the vertices back to world coordinates. Each
/// retained quad contributes two triangles; quads with any corner outside
/// the alpha shape are omitted.
inline TriangleMesh sample_heightmap_mesh(const HeightMap& heightmap,
                                          const LeafFrame& frame, double h) {
  if (!(h > 0.0)) throw Error("sample_heightmap_mesh: spacing must be positive");
  const Vec2 ext = heightmap.domain.extent();
  if (!(ext[0] > 0.0) || !(ext[1] > 0.0))
    throw Error("sample_heightmap_mesh: empty height map domain");

  const int nx = static_cast<int>(std::floor(ext[0] / h)) + 1;
  const int ny = static_cast<int>(std::floor(ext[1] / h)) + 1;

  std::vector<std::int64_t> index(static_cast<std::size_t>(nx) * ny, -1);
  std::vector<Vec2> kept;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Vec2 p(heightmap.domain.lo[0] + i * h, heightmap.domain.lo[1] + j * h);
      if (heightmap.shape.contains(p)) {
        index[static_cast<std::size_t>(j) * nx + i] =
            static_cast<std::int64_t>(kept.size());
        kept.push_back(p);
      }
    }
  }

  TriangleMesh mesh;
  mesh.provenance = MeshProvenance::Heightmap;
  mesh.vertices.resize(kept.size());
  const std::ptrdiff_t nkept = static_cast<std::ptrdiff_t>(kept.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t v = 0; v < nkept; ++v) {
    const Vec2& p = kept[v];
    const double height = heightmap.eval(p[0], p[1]);
    mesh.vertices[v] = frame.leaf_to_world(Vec3(p[0], p[1], height));
  }

  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const std::int64_t v00 = index[static_cast<std::size_t>(j) * nx + i];
      const std::int64_t v10 = index[static_cast<std::size_t>(j) * nx + i + 1];
      const std::int64_t v01 = index[static_cast<std::size_t>(j + 1) * nx + i];
      const std::int64_t v11 = index[static_cast<std::size_t>(j + 1) * nx + i + 1];
      const int kept_corners =
          (v00 >= 0) + (v10 >= 0) + (v01 >= 0) + (v11 >= 0);
      if (kept_corners == 4) {
        mesh.triangles.push_back({static_cast<std::uint32_t>(v00),
                                  static_cast<std::uint32_t>(v10),
                                  static_cast<std::uint32_t>(v11)});
        mesh.triangles.push_back({static_cast<std::uint32_t>(v00),
                                  static_cast<std::uint32_t>(v11),
                                  static_cast<std::uint32_t>(v01)});
      } else if (kept_corners == 3) {
        // Rim quad: keep the one triangle whose corners all survived, in
        // the same counter-clockwise order as the full quads.
        if (v00 < 0)
          mesh.triangles.push_back({static_cast<std::uint32_t>(v10),
                                    static_cast<std::uint32_t>(v11),
                                    static_cast<std::uint32_t>(v01)});
        else if (v10 < 0)
          mesh.triangles.push_back({static_cast<std::uint32_t>(v00),
                                    static_cast<std::uint32_t>(v11),
                                    static_cast<std::uint32_t>(v01)});
        else if (v11 < 0)
          mesh.triangles.push_back({static_cast<std::uint32_t>(v00),
                                    static_cast<std::uint32_t>(v10),
                                    static_cast<std::uint32_t>(v01)});
        else
          mesh.triangles.push_back({static_cast<std::uint32_t>(v00),
                                    static_cast<std::uint32_t>(v10),
                                    static_cast<std::uint32_t>(v11)});
      }
    }
  }
  mesh.remove_degenerate_triangles();
  return mesh;
}

}  // namespace leafsurf
