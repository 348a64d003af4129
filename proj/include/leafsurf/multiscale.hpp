#pragma once

#include <cmath>
#include <vector>

#include "leafsurf/common.hpp"
#include "leafsurf/leaf_frame.hpp"
#include "leafsurf/reconstruction.hpp"

namespace leafsurf {

/// Regular grid of tile displacements covering the flattened leaf domain
/// with one extra margin ring. Displacement spacing equals the micro tile
/// extent exactly; all displacements have zero third component.
struct TilingLayout {
  Vec2 tile_extent = Vec2::Zero();
  int q1_min = 0, q1_max = -1;
  int q2_min = 0, q2_max = -1;
  BoundingBox<2> covered;

  std::size_t copy_count() const {
    return static_cast<std::size_t>(q1_max - q1_min + 1) *
           static_cast<std::size_t>(q2_max - q2_min + 1);
  }

  Vec3 displacement(int q1, int q2) const {
    return Vec3(q1 * tile_extent[0], q2 * tile_extent[1], 0.0);
  }

  std::vector<Vec3> displacements() const {
    std::vector<Vec3> out;
    out.reserve(copy_count());
    for (int q2 = q2_min; q2 <= q2_max; ++q2)
      for (int q1 = q1_min; q1 <= q1_max; ++q1) out.push_back(displacement(q1, q2));
    return out;
  }

  bool holds(int q1, int q2) const {
    return q1 >= q1_min && q1 <= q1_max && q2 >= q2_min && q2 <= q2_max;
  }
};

inline TilingLayout build_tiling(const MicroPatch& micro, const BoundingBox<2>& domain) {
  const Vec2 w(micro.extent.extent()[0], micro.extent.extent()[1]);
  if (!(w[0] > 0.0) || !(w[1] > 0.0))
    throw Error("build_tiling: tile extent must be positive in both axes");
  if (!(domain.extent()[0] > 0.0) || !(domain.extent()[1] > 0.0))
    throw Error("build_tiling: empty domain");

  TilingLayout layout;
  layout.tile_extent = w;
  // Footprint of copy q is the patch extent shifted by q * w; cover the
  // domain and add one ring of margin.
  layout.q1_min =
      static_cast<int>(std::floor((domain.lo[0] - micro.extent.lo[0]) / w[0])) - 1;
  layout.q1_max =
      static_cast<int>(std::ceil((domain.hi[0] - micro.extent.hi[0]) / w[0])) + 1;
  layout.q2_min =
      static_cast<int>(std::floor((domain.lo[1] - micro.extent.lo[1]) / w[1])) - 1;
  layout.q2_max =
      static_cast<int>(std::ceil((domain.hi[1] - micro.extent.hi[1]) / w[1])) + 1;
  layout.covered.expand(Vec2(micro.extent.lo[0] + layout.q1_min * w[0],
                             micro.extent.lo[1] + layout.q2_min * w[1]));
  layout.covered.expand(Vec2(micro.extent.hi[0] + layout.q1_max * w[0],
                             micro.extent.hi[1] + layout.q2_max * w[1]));
  return layout;
}

/// The combined multi-scale field: leaf frame + macro height map + tiled
/// micro patch. Immutable and safe to evaluate from many threads.
class MultiScaleField {
public:
  MultiScaleField() = default;

  MultiScaleField(LeafFrame frame, HeightMap heightmap, MicroPatch micro,
                  TilingLayout layout)
      : frame_(std::move(frame)),
        heightmap_(std::move(heightmap)),
        micro_(std::move(micro)),
        layout_(layout) {
    for (const auto& s : micro_.field.subdomains())
      max_radius_ = std::max(max_radius_, s.radius);
  }

  /// T*(x): world -> leaf coordinates with the macro height subtracted from
  /// the normal component.
  Vec3 t_star(const Vec3& x) const {
    const LeafCoords lc = frame_.world_to_leaf(x);
    if (lc.clamped)
      throw OutsideDomainError("t_star: projection clamped to the frame boundary");
    if (!heightmap_.shape.contains(Vec2(lc.y[0], lc.y[1])))
      throw OutsideDomainError("t_star: outside the height map domain");
    return Vec3(lc.y[0], lc.y[1], lc.y[2] - heightmap_.eval(lc.y[0], lc.y[1]));
  }

  /// Blended field over all displaced subdomain copies, evaluated directly
  /// at offset leaf coordinates z = T*(x). Each local interpolant is
  /// evaluated at the displaced argument z - s_q.
  double eval_at_star(const Vec3& z) const {
    double num = 0.0, den = 0.0;
    for_active(z, [&](const Subdomain<3>& sub, const Vec3& zq, double tau) {
      const double w = wendland(tau);
      den += w;
      num += w * sub.local.eval(zq);
    });
    if (den <= 0.0)
      throw OutsideDomainError("eval_multiscale: outside micro coverage");
    return num / den;
  }

  double eval(const Vec3& x) const { return eval_at_star(t_star(x)); }

  /// Normalized combined weights w_i^q at z; for partition-of-unity checks.
  std::vector<double> normalized_weights_at_star(const Vec3& z) const {
    std::vector<double> ws;
    double den = 0.0;
    for_active(z, [&](const Subdomain<3>&, const Vec3&, double tau) {
      const double w = wendland(tau);
      ws.push_back(w);
      den += w;
    });
    if (den <= 0.0)
      throw OutsideDomainError("eval_multiscale: outside micro coverage");
    for (double& w : ws) w /= den;
    return ws;
  }

  const LeafFrame& frame() const { return frame_; }
  const HeightMap& heightmap() const { return heightmap_; }
  const MicroPatch& micro() const { return micro_; }
  const TilingLayout& layout() const { return layout_; }

private:
  /// Enumerates active (subdomain, copy) pairs via the tile lattice cell of
  /// z and the micro field's spatial index; cost independent of the total
  /// number of copies.
  template <class Fn>
  void for_active(const Vec3& z, const Fn& fn) const {
    const Vec2& w = layout_.tile_extent;
    const auto& ext = micro_.extent;
    const int a1 = static_cast<int>(std::ceil((z[0] - ext.hi[0] - max_radius_) / w[0]));
    const int b1 = static_cast<int>(std::floor((z[0] - ext.lo[0] + max_radius_) / w[0]));
    const int a2 = static_cast<int>(std::ceil((z[1] - ext.hi[1] - max_radius_) / w[1]));
    const int b2 = static_cast<int>(std::floor((z[1] - ext.lo[1] + max_radius_) / w[1]));
    for (int q2 = std::max(a2, layout_.q2_min); q2 <= std::min(b2, layout_.q2_max); ++q2) {
      for (int q1 = std::max(a1, layout_.q1_min); q1 <= std::min(b1, layout_.q1_max);
           ++q1) {
        const Vec3 zq = z - layout_.displacement(q1, q2);
        for (const auto& act : micro_.field.active(zq)) {
          fn(micro_.field[act.index], zq, act.tau);
        }
      }
    }
  }

  LeafFrame frame_;
  HeightMap heightmap_;
  MicroPatch micro_;
  TilingLayout layout_;
  double max_radius_ = 0.0;
};

inline Vec3 t_star(const MultiScaleField& field, const Vec3& x) {
  return field.t_star(x);
}
inline double eval_multiscale(const MultiScaleField& field, const Vec3& x) {
  return field.eval(x);
}

}  // namespace leafsurf
