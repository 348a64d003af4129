#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "leafsurf/common.hpp"
#include "leafsurf/delaunay.hpp"
#include "leafsurf/leaf_frame.hpp"
#include "leafsurf/partition.hpp"

namespace leafsurf {

/// Regular voxel grid of radio-density measurements, normalized to [0,1].
struct VoxelVolume {
  std::array<int, 3> dims = {0, 0, 0};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  std::vector<float> intensities;  // x fastest, then y, then z

  std::size_t count() const { return intensities.size(); }
  std::size_t linear(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  float at(int i, int j, int k) const { return intensities[linear(i, j, k)]; }
  Vec3 center(int i, int j, int k) const {
    return origin + Vec3((i + 0.5) * spacing[0], (j + 0.5) * spacing[1],
                         (k + 0.5) * spacing[2]);
  }
  Vec3 extent() const {
    return Vec3(dims[0] * spacing[0], dims[1] * spacing[1], dims[2] * spacing[2]);
  }
};

/// Estimates the surface threshold from the histogram of nonzero voxel
/// intensities: the minimum-count bin strictly between the two dominant
/// peaks (air and leaf material).
inline double estimate_threshold(const VoxelVolume& volume) {
  constexpr int kBins = 256;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (float v : volume.intensities) {
    if (v <= 0.0f) continue;
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  if (!(hi > lo))
    throw Error("estimate_threshold: degenerate histogram, set the threshold manually");

  std::array<double, kBins> counts{};
  const double width = (hi - lo) / kBins;
  for (float v : volume.intensities) {
    if (v <= 0.0f) continue;
    int b = static_cast<int>((v - lo) / width);
    b = std::clamp(b, 0, kBins - 1);
    counts[b] += 1.0;
  }

  // Light smoothing so sampling noise does not split a peak in two.
  std::array<double, kBins> smooth{};
  for (int i = 0; i < kBins; ++i) {
    double sum = 0.0, n = 0.0;
    for (int j = std::max(0, i - 2); j <= std::min(kBins - 1, i + 2); ++j) {
      sum += counts[j];
      n += 1.0;
    }
    smooth[i] = sum / n;
  }

  std::vector<int> maxima;
  for (int i = 0; i < kBins; ++i) {
    const double left = i > 0 ? smooth[i - 1] : -1.0;
    const double right = i < kBins - 1 ? smooth[i + 1] : -1.0;
    if (smooth[i] > 0.0 && smooth[i] >= left && smooth[i] >= right &&
        (smooth[i] > left || smooth[i] > right))
      maxima.push_back(i);
  }
  if (maxima.size() < 2)
    throw Error("estimate_threshold: histogram is unimodal, set the threshold manually");

  // Dominant peak, then the best peak separated from it by a genuine valley.
  int p1 = maxima[0];
  for (int m : maxima)
    if (smooth[m] > smooth[p1]) p1 = m;
  int p2 = -1;
  for (int m : maxima) {
    if (m == p1) continue;
    // Sparse tail bumps are not modes: demand a significant secondary peak.
    if (smooth[m] < 0.05 * smooth[p1]) continue;
    double valley = std::numeric_limits<double>::infinity();
    for (int i = std::min(m, p1) + 1; i < std::max(m, p1); ++i)
      valley = std::min(valley, smooth[i]);
    if (valley < 0.5 * std::min(smooth[m], smooth[p1]) &&
        (p2 < 0 || smooth[m] > smooth[p2]))
      p2 = m;
  }
  if (p2 < 0)
    throw Error("estimate_threshold: histogram is unimodal, set the threshold manually");

  const int a = std::min(p1, p2), b = std::max(p1, p2);
  int valley_bin = a + 1;
  for (int i = a + 1; i < b; ++i)
    if (counts[i] < counts[valley_bin]) valley_bin = i;
  return lo + (valley_bin + 0.5) * width;
}

/// Emits voxel centres near the threshold at full resolution plus a coarse
/// lattice of every stride-th voxel per axis to anchor the field
/// off-surface. Values are offset intensities f - f_surface. stride <= 0
/// disables off-band samples.
inline LabeledPoints<3> select_voxels(const VoxelVolume& volume, double f_surface,
                                      double band, std::ptrdiff_t stride) {
  if (!(band > 0.0)) throw Error("select_voxels: band must be positive");
  LabeledPoints<3> out;
  std::size_t idx = 0;
  for (int k = 0; k < volume.dims[2]; ++k)
    for (int j = 0; j < volume.dims[1]; ++j)
      for (int i = 0; i < volume.dims[0]; ++i, ++idx) {
        const double f = volume.intensities[idx];
        const bool in_band = std::abs(f - f_surface) <= band;
        const bool off_band =
            stride > 0 && i % stride == 0 && j % stride == 0 && k % stride == 0;
        if (in_band || off_band) {
          out.sites.push_back(volume.center(i, j, k));
          out.values.push_back(f - f_surface);
        }
      }
  if (out.sites.empty()) throw Error("select_voxels: empty selection");
  return out;
}

/// Rigid alignment of the micro patch: maps the smallest principal
/// direction of the above-threshold voxels to the z3 axis (minimal
/// rotation) and centres their centroid at the origin.
struct MicroAlignment {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();  // applied after rotation: z = R x + t

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  Vec3 invert(const Vec3& z) const { return rotation.transpose() * (z - translation); }
};

inline std::pair<MicroAlignment, LabeledPoints<3>> align_micro(
    const LabeledPoints<3>& points) {
  std::vector<Vec3> solid;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (points.values[i] > 0.0) solid.push_back(points.sites[i]);
  if (solid.size() < 3)
    throw Error("align_micro: too few above-threshold points");

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : solid) centroid += p;
  centroid /= static_cast<double>(solid.size());

  Vec3 normal;
  try {
    normal = pca_normal(solid);
  } catch (const Error& e) {
    throw Error("align_micro: degenerate covariance (" + std::string(e.what()) + ")");
  }
  if (normal.z() < 0.0) normal = -normal;

  // Minimal rotation taking the thin axis onto e3; keeps the in-plane axes
  // stable when the patch footprint is close to square.
  MicroAlignment align;
  const Vec3 e3 = Vec3::UnitZ();
  const Vec3 axis = normal.cross(e3);
  const double sin_a = axis.norm();
  const double cos_a = normal.dot(e3);
  if (sin_a > 1e-15) {
    align.rotation = Eigen::AngleAxisd(std::atan2(sin_a, cos_a), axis / sin_a)
                         .toRotationMatrix();
  }
  align.translation = -(align.rotation * centroid);

  LabeledPoints<3> transformed;
  transformed.sites.resize(points.size());
  transformed.values = points.values;
  for (std::size_t i = 0; i < points.size(); ++i)
    transformed.sites[i] = align.apply(points.sites[i]);
  return {align, std::move(transformed)};
}

/// High-resolution implicit patch: a 3-D PU field whose zero level set is
/// the micro-scale leaf boundary, aligned so the leaf lies in the (z1,z2)
/// plane.
struct MicroPatch {
  PUField<3> field;
  BoundingBox<3> extent;  // axis-aligned box in aligned micro coordinates
  double f_surface = 0.0;
  MicroAlignment alignment;

  double eval(const Vec3& z) const { return field.eval(z); }
};

struct MicroFitParams {
  double rho = 1e-7;
  std::size_t capacity = 400;
  double overlap = 1.25;
  double band = 0.1;
  std::ptrdiff_t stride = 8;
};

inline MicroPatch fit_micro_implicit(const VoxelVolume& volume, double f_surface,
                                     const MicroFitParams& params = {}) {
  LabeledPoints<3> selected = select_voxels(volume, f_surface, params.band, params.stride);

  // Alignment from a uniform subsample of the above-threshold voxels. The
  // fit selection concentrates on the surface band, which over-weights
  // steep walls and measurably tilts the principal axes; a uniform solid
  // subsample estimates the same covariance without that bias.
  LabeledPoints<3> solid;
  for (int pass = 0; pass < 2 && solid.size() < 1000; ++pass) {
    const int s = pass == 0 ? 4 : 1;
    solid = LabeledPoints<3>{};
    std::size_t idx = 0;
    for (int k = 0; k < volume.dims[2]; ++k)
      for (int j = 0; j < volume.dims[1]; ++j)
        for (int i = 0; i < volume.dims[0]; ++i, ++idx) {
          const double f = volume.intensities[idx];
          if (f > f_surface && i % s == 0 && j % s == 0 && k % s == 0) {
            solid.sites.push_back(volume.center(i, j, k));
            solid.values.push_back(f - f_surface);
          }
        }
  }
  MicroAlignment align = align_micro(solid).first;
  LabeledPoints<3> transformed;
  transformed.sites.resize(selected.size());
  transformed.values = selected.values;
  for (std::size_t i = 0; i < selected.size(); ++i)
    transformed.sites[i] = align.apply(selected.sites[i]);

  MicroPatch patch;
  patch.field = fit_pu<3>(transformed, params.rho, params.capacity, params.overlap);
  patch.f_surface = f_surface;
  patch.alignment = align;
  // In-plane extent from the full voxel box, not the selected points: the
  // tile period must match the scanned patch width exactly. In z, keep only
  // the range covered at every in-plane position: a slightly tilted
  // alignment makes the corners of the scanned box overhang its axis-aligned
  // hull, and samples in those uncovered wedges are pure extrapolation.
  double z_bottom = -std::numeric_limits<double>::infinity();
  double z_top = std::numeric_limits<double>::infinity();
  for (int corner = 0; corner < 8; ++corner) {
    Vec3 c = volume.origin;
    const Vec3 ext = volume.extent();
    for (int k = 0; k < 3; ++k)
      if ((corner >> k) & 1) c[k] += ext[k];
    const Vec3 a = align.apply(c);
    patch.extent.expand(Vec3(a[0], a[1], 0.0));  // z bounds assigned below
    if ((corner >> 2) & 1)
      z_top = std::min(z_top, a[2]);
    else
      z_bottom = std::max(z_bottom, a[2]);
  }
  if (!(z_top > z_bottom))
    throw Error("fit_micro_implicit: alignment tilt leaves no fully covered depth range");
  patch.extent.lo[2] = z_bottom;
  patch.extent.hi[2] = z_top;
  return patch;
}

/// Explicit macro-scale surface: height y3 over the flattened (y1,y2)
/// plane, clipped by the alpha shape of the transformed cloud.
struct HeightMap {
  PUField<2> field;
  BoundingBox<2> domain;
  AlphaShape2D shape;
  std::size_t dropped_points = 0;  // cloud points with clamped projections

  double eval(double y1, double y2) const { return field.eval(Vec2(y1, y2)); }
};

struct MacroFitParams {
  double rho = 1e-6;
  std::size_t capacity = 400;
  double overlap = 1.25;
  double alpha = 0.0;  // <= 0 selects 5x median nearest-neighbour spacing
};

inline HeightMap fit_macro_heightmap(std::span<const Vec3> cloud, const LeafFrame& frame,
                                     const MacroFitParams& params = {}) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(cloud.size());
  std::vector<LeafCoords> coords(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) coords[i] = frame.world_to_leaf(cloud[i]);

  HeightMap hm;
  LabeledPoints<2> samples;
  for (const auto& lc : coords) {
    if (lc.clamped) {
      ++hm.dropped_points;
      continue;
    }
    samples.sites.emplace_back(lc.y[0], lc.y[1]);
    samples.values.push_back(lc.y[2]);
  }
  if (samples.size() < 3)
    throw Error("fit_macro_heightmap: too few points project onto the frame interior");

  hm.field = fit_pu<2>(samples, params.rho, params.capacity, params.overlap);
  hm.domain = bounding_box<2>(std::span<const Vec2>(samples.sites));
  const double alpha = params.alpha > 0.0
                           ? params.alpha
                           : default_alpha(std::span<const Vec2>(samples.sites));
  hm.shape = alpha_shape(delaunay2d(samples.sites), alpha);
  return hm;
}

}  // namespace leafsurf
