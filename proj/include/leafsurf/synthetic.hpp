#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <omp.h>

#include "leafsurf/common.hpp"
#include "leafsurf/numerics.hpp"
#include "leafsurf/reconstruction.hpp"

namespace leafsurf {

/// Synthetic wheat-leaf fixture: a bowed, twisted blade with a periodic
/// micro relief (ridges plus hair bumps), emitted as a noisy macro point
/// cloud, medial-axis control points, and a micro-CT style voxel volume of
/// one surface tile. All quantities are in millimetres.
struct SynthParams {
  double length = 80.0;
  double width = 10.0;
  double bow = 0.8;          // medial axis deflection at mid-span
  double twist_deg = 8.0;    // total twist along the blade
  double thickness = 0.15;   // slab thickness of the micro tile

  double ridge_amplitude = 0.030;
  double ridge_period = 0.150;
  int hair_count = 20;
  double hair_radius = 0.030;      // at the base
  double hair_tip_radius = 0.012;  // at the rounded tip
  double hair_height = 0.150;

  double noise_sigma = 0.1;  // macro cloud noise along the surface normal
  std::size_t cloud_count = 80000;

  double patch_size = 2.0;   // micro tile is patch_size x patch_size
  double voxel = 0.003;
  std::uint64_t seed = 1;
};

namespace synth_detail {

// Distribution helpers with a fully specified bit stream, so a fixed seed
// reproduces byte-identical output on any standard library.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}
inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform01(gen);
}
inline double normal(std::mt19937_64& gen) {
  const double u1 = uniform01(gen);
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace synth_detail

class SyntheticLeaf {
public:
  explicit SyntheticLeaf(const SynthParams& params) : p_(params) {
    if (!(p_.length > 0.0) || !(p_.width > 0.0) || !(p_.voxel > 0.0) ||
        !(p_.patch_size > 0.0) || !(p_.thickness > 0.0))
      throw Error("SyntheticLeaf: dimensions must be positive");
    if (p_.hair_count < 0 || !(p_.hair_radius > 0.0) ||
        !(p_.hair_tip_radius > 0.0) || p_.hair_tip_radius > p_.hair_radius)
      throw Error("SyntheticLeaf: invalid hair parameters");

    std::mt19937_64 gen(p_.seed);
    scatter_hairs(gen);
    make_control_points();
    make_cloud(gen);
    make_volume();
  }

  const SynthParams& params() const { return p_; }
  const std::vector<Vec3>& cloud() const { return cloud_; }
  const std::vector<Vec3>& control_points() const { return control_points_; }
  const VoxelVolume& volume() const { return volume_; }
  const std::vector<Vec2>& hair_positions() const { return hairs_; }

  // --- analytic leaf frame -------------------------------------------------

  Vec3 medial_point(double u) const {
    return Vec3(u, 0.0, p_.bow * std::sin(std::numbers::pi * u / p_.length));
  }

  FrameAxes analytic_axes(double u) const {
    FrameAxes f;
    const double slope =
        p_.bow * std::numbers::pi / p_.length * std::cos(std::numbers::pi * u / p_.length);
    f.tangent = Vec3(1.0, 0.0, slope).normalized();

    const Vec3 up = Vec3::UnitZ();
    Vec3 base = (up - up.dot(f.tangent) * f.tangent).normalized();
    const double phi = p_.twist_deg * std::numbers::pi / 180.0 * u / p_.length;
    f.V = Eigen::AngleAxisd(phi, f.tangent) * base;
    f.W = f.tangent.cross(f.V).normalized();
    return f;
  }

  /// Mid-surface point at medial parameter u and lateral offset w.
  Vec3 surface_point(double u, double w) const {
    return medial_point(u) + w * analytic_axes(u).W;
  }

  /// Closest-point decomposition against the analytic medial axis:
  /// returns (u, lateral offset, normal height).
  Vec3 world_to_analytic(const Vec3& x) const {
    auto dist2 = [&](double u) { return (x - medial_point(u)).squaredNorm(); };
    constexpr int kSamples = 128;
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kSamples; ++i) {
      const double u = p_.length * static_cast<double>(i) / kSamples;
      const double v = dist2(u);
      if (v < best_val) {
        best_val = v;
        best = i;
      }
    }
    const double step = p_.length / kSamples;
    const double lo = std::max(0.0, (best - 1) * step);
    const double hi = std::min(p_.length, (best + 1) * step);
    const double u = brent_min(dist2, lo, hi, 1e-10 * p_.length);
    const FrameAxes f = analytic_axes(u);
    const Vec3 r = x - medial_point(u);
    return Vec3(u, r.dot(f.W), r.dot(f.V));
  }

  // --- micro tile geometry -------------------------------------------------

  double ridge_height(double z2) const {
    return p_.ridge_amplitude *
           std::sin(2.0 * std::numbers::pi * z2 / p_.ridge_period);
  }

  /// Signed distance to the tile solid (negative inside) in volume
  /// coordinates: z1, z2 in [0, patch_size], z3 the physical height. Exact
  /// near the boundary, which is all the intensity model needs.
  double tile_sdf(const Vec3& z) const {
    const double g = ridge_height(z[1]);
    const double gp = p_.ridge_amplitude * 2.0 * std::numbers::pi / p_.ridge_period *
                      std::cos(2.0 * std::numbers::pi * z[1] / p_.ridge_period);
    const double top = (z[2] - g) / std::sqrt(1.0 + gp * gp);
    const double bottom = -p_.thickness - z[2];
    double sdf = std::max(top, bottom);

    // Tapered hairs: a rounded cone from inside the slab up to the tip.
    // The taper also keeps the wall off the vertical degeneracy where a
    // constant-radius cylinder repeats the same voxel-plane tangency at
    // every height.
    const double za = -0.5 * p_.thickness;
    const double zb = p_.hair_height - p_.hair_tip_radius;
    const double ra = p_.hair_radius, rb = p_.hair_tip_radius;
    const double l2 = (zb - za) * (zb - za);
    const double rr = ra - rb;
    const double a2 = l2 - rr * rr;
    const double il2 = 1.0 / l2;
    for (const auto& h : hairs_) {
      // Exact signed distance to the rounded cone with a vertical axis.
      const Vec3 pa(z[0] - h[0], z[1] - h[1], z[2] - za);
      const double y = pa[2] * (zb - za);
      const double zz = y - l2;
      const double x2 = l2 * l2 * (pa[0] * pa[0] + pa[1] * pa[1]);
      const double y2 = y * y * l2;
      const double z2 = zz * zz * l2;
      const double k = rr * rr * x2;
      double d;
      if (zz > 0.0 && a2 * z2 > k)
        d = std::sqrt(x2 + z2) * il2 - rb;
      else if (y < 0.0 || a2 * y2 < k)
        d = std::sqrt(x2 + y2) * il2 - ra;
      else
        d = (std::sqrt(x2 * a2 * il2) + y * rr) * il2 - ra;
      sdf = std::min(sdf, d);
    }
    return sdf;
  }

private:
  void scatter_hairs(std::mt19937_64& gen) {
    // Keep hairs clear of the tile rim so the periodic continuation stays
    // collision-free.
    const double margin = std::max(0.05 * p_.patch_size, 2.0 * p_.hair_radius);
    if (2.0 * margin >= p_.patch_size)
      throw Error("SyntheticLeaf: patch too small for the hair margin");
    hairs_.reserve(static_cast<std::size_t>(p_.hair_count));
    int rejected = 0;
    while (hairs_.size() < static_cast<std::size_t>(p_.hair_count)) {
      const Vec2 h(synth_detail::uniform(gen, margin, p_.patch_size - margin),
                   synth_detail::uniform(gen, margin, p_.patch_size - margin));
      bool clear = true;
      for (const auto& other : hairs_)
        if ((h - other).norm() < 4.0 * p_.hair_radius) clear = false;
      if (clear) {
        hairs_.push_back(h);
        rejected = 0;
      } else if (++rejected > 10000) {
        // Dart throwing saturated: the requested density does not fit the
        // usable patch interior at the required spacing.
        throw Error("SyntheticLeaf: cannot place " +
                    std::to_string(p_.hair_count) +
                    " hairs in the patch at the required separation");
      }
    }
  }

  void make_control_points() {
    constexpr int kControl = 9;
    control_points_.reserve(kControl);
    for (int j = 0; j < kControl; ++j)
      control_points_.push_back(medial_point(p_.length * j / (kControl - 1)));
  }

  void make_cloud(std::mt19937_64& gen) {
    cloud_.reserve(p_.cloud_count);
    for (std::size_t i = 0; i < p_.cloud_count; ++i) {
      const double u = synth_detail::uniform(gen, 0.0, p_.length);
      const double w = synth_detail::uniform(gen, -0.5 * p_.width, 0.5 * p_.width);
      const double eta = p_.noise_sigma * synth_detail::normal(gen);
      cloud_.push_back(surface_point(u, w) + eta * analytic_axes(u).V);
    }
  }

  void make_volume() {
    // Half-voxel margin offset parks the slab's flat underside exactly on a
    // voxel-centre plane. A plane midway between sample planes is invisible
    // to a narrow intensity band, which would leave the underside anchored
    // only by the coarse off-band lattice.
    const double zlo = -p_.thickness - 6.5 * p_.voxel;
    const double zhi = p_.ridge_amplitude + p_.hair_height + 6.0 * p_.voxel;
    volume_.origin = Vec3(0.0, 0.0, zlo);
    volume_.dims[0] = static_cast<int>(std::round(p_.patch_size / p_.voxel));
    volume_.dims[1] = volume_.dims[0];
    volume_.dims[2] = static_cast<int>(std::ceil((zhi - zlo) / p_.voxel));
    // Snap the in-plane spacing so the scanned box spans exactly one relief
    // period; the nominal voxel size rarely divides the patch evenly, and a
    // fractional-voxel overhang would phase-shift every tiled copy.
    const double snapped = p_.patch_size / volume_.dims[0];
    volume_.spacing = Vec3(snapped, snapped, p_.voxel);
    volume_.intensities.resize(static_cast<std::size_t>(volume_.dims[0]) *
                               volume_.dims[1] * volume_.dims[2]);

    // Soft indicator: ~1 inside the solid, ~0 outside, one-voxel-wide
    // transition. Each voxel is independent, so the fill is deterministic
    // under any thread count.
    const int nz = volume_.dims[2];
#pragma omp parallel for schedule(static)
    for (int k = 0; k < nz; ++k) {
      for (int j = 0; j < volume_.dims[1]; ++j)
        for (int i = 0; i < volume_.dims[0]; ++i) {
          const double sdf = tile_sdf(volume_.center(i, j, k));
          volume_.intensities[volume_.linear(i, j, k)] =
              static_cast<float>(0.5 * (1.0 - std::tanh(sdf / p_.voxel)));
        }
    }
  }

  SynthParams p_;
  std::vector<Vec2> hairs_;
  std::vector<Vec3> control_points_;
  std::vector<Vec3> cloud_;
  VoxelVolume volume_;
};

inline SyntheticLeaf generate_synthetic_leaf(const SynthParams& params = {}) {
  return SyntheticLeaf(params);
}

}  // namespace leafsurf
