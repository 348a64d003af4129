#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "leafsurf/common.hpp"

namespace leafsurf {

enum class MeshProvenance : std::uint8_t { Implicit = 0, Heightmap = 1 };

/// Indexed triangle soup.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  MeshProvenance provenance = MeshProvenance::Implicit;

  static double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
  }

  double total_area() const {
    double area = 0.0;
    for (const auto& t : triangles)
      area += triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    return area;
  }

  /// Drops triangles with area below 1e-12 of the mean triangle area.
  void remove_degenerate_triangles() {
    if (triangles.empty()) return;
    const double mean = total_area() / static_cast<double>(triangles.size());
    const double cutoff = 1e-12 * mean;
    std::erase_if(triangles, [&](const auto& t) {
      return triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) <= cutoff;
    });
  }
};

}  // namespace leafsurf
