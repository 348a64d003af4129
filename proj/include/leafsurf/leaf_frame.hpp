#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "leafsurf/common.hpp"
#include "leafsurf/numerics.hpp"
#include "leafsurf/spline.hpp"

namespace leafsurf {

struct FrameAxes {
  Vec3 tangent;  // m'(t), normalized
  Vec3 V;        // surface normal (height axis)
  Vec3 W;        // lateral (binormal) axis
};

struct LeafCoords {
  Vec3 y;               // [arc length, lateral W offset, normal V height]
  bool clamped = false; // closest-point parameter hit the spline boundary
};

/// Locally orthogonal leaf coordinate system: an arc-length parameterized
/// medial-axis spline m(t) plus a spline of raw control-point normals.
/// Frame axes at a parameter t are (m'/|m'|, V, W) with V the Gram-Schmidt
/// projection of the normal spline and W = tangent x V.
///
/// Coordinate convention: y1 = arc length, y2 = lateral (W) offset,
/// y3 = normal (V) height.
class LeafFrame {
public:
  LeafFrame() = default;

  LeafFrame(CubicSpline3 medial, CubicSpline3 normal_raw, double R)
      : medial_(std::move(medial)), normal_raw_(std::move(normal_raw)), R_(R) {
    if (medial_.knots() != normal_raw_.knots())
      throw Error("LeafFrame: medial and normal splines must share knots");
  }

  /// Builds the frame from a point cloud, an ordered set of medial-axis
  /// control points, and the normal-estimation radius R.
  static LeafFrame build(std::span<const Vec3> cloud,
                         std::span<const Vec3> control_points, double R) {
    const std::size_t K = control_points.size();
    if (K < 3) throw Error("build_frame: needs at least 3 control points");
    if (!(R > 0.0)) throw Error("build_frame: R must be positive");

    // Chord-length parameterization, then arc-length reparameterization.
    std::vector<double> chord(K, 0.0);
    for (std::size_t j = 1; j < K; ++j) {
      const double d = (control_points[j] - control_points[j - 1]).norm();
      if (!(d > 0.0)) throw Error("build_frame: duplicate consecutive control points");
      chord[j] = chord[j - 1] + d;
    }
    CubicSpline3 medial = CubicSpline3::fit(
        chord, std::vector<Vec3>(control_points.begin(), control_points.end()));
    auto [params, refit] = reparam_arclength(medial);
    medial = std::move(refit);

    // PCA normals at the control points, oriented consistently.
    std::vector<Vec3> normals(K);
    const double R2 = R * R;
    for (std::size_t j = 0; j < K; ++j) {
      std::vector<Vec3> nbrs;
      for (const auto& p : cloud)
        if ((p - control_points[j]).squaredNorm() < R2) nbrs.push_back(p);
      try {
        normals[j] = pca_normal(nbrs);
      } catch (const Error& e) {
        throw Error("build_frame: control point " + std::to_string(j) + ": " + e.what());
      }
      if (j > 0) {
        const double dot = normals[j].dot(normals[j - 1]);
        if (std::abs(dot) < 1e-10)
          throw Error("build_frame: cannot orient normal at control point " +
                      std::to_string(j) + " (perpendicular to its predecessor)");
        if (dot < 0.0) normals[j] = -normals[j];
      }
    }
    CubicSpline3 normal_raw = CubicSpline3::fit(params, std::move(normals));
    return LeafFrame(std::move(medial), std::move(normal_raw), R);
  }

  FrameAxes axes(double t) const {
    FrameAxes f;
    const Vec3 deriv = medial_.derivative(t);
    const double dn = deriv.norm();
    if (!(dn > 0.0)) throw Error("frame_axes: vanishing medial tangent");
    f.tangent = deriv / dn;

    const Vec3 vraw = normal_raw_.eval(t);
    Vec3 vperp = vraw - vraw.dot(f.tangent) * f.tangent;
    const double vn = vperp.norm();
    if (vn < 1e-10 * std::max(1.0, vraw.norm()))
      throw Error("frame_axes: normal spline parallel to tangent (degenerate "
                  "Gram-Schmidt)");
    f.V = vperp / vn;
    f.W = f.tangent.cross(f.V).normalized();
    return f;
  }

  /// World -> leaf transform: closest-point projection onto the medial
  /// axis (multi-start sampling plus Brent refinement), then decomposition
  /// into the local frame at t*.
  LeafCoords world_to_leaf(const Vec3& x) const {
    const double t0 = medial_.t_min();
    const double t1 = medial_.t_max();
    auto dist2 = [&](double t) { return (x - medial_.eval(t)).squaredNorm(); };

    constexpr int kSamples = 64;
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kSamples; ++i) {
      const double t = t0 + (t1 - t0) * static_cast<double>(i) / kSamples;
      const double v = dist2(t);
      if (v < best_val) {
        best_val = v;
        best = i;
      }
    }
    const double step = (t1 - t0) / kSamples;
    const double lo = std::max(t0, t0 + (best - 1) * step);
    const double hi = std::min(t1, t0 + (best + 1) * step);
    const double tstar = brent_min(dist2, lo, hi, 1e-8 * (t1 - t0));

    const FrameAxes f = axes(tstar);
    const Vec3 r = x - medial_.eval(tstar);
    LeafCoords out;
    out.y = Vec3(tstar, r.dot(f.W), r.dot(f.V));
    // Must sit above the minimizer's stopping tolerance: a boundary minimum
    // converges to within that tolerance of the end, not onto it.
    const double edge_tol = 1e-6 * (t1 - t0);
    out.clamped = (tstar - t0 <= edge_tol) || (t1 - tstar <= edge_tol);
    return out;
  }

  /// Leaf -> world transform: x = m(y1) + y2 W(y1) + y3 V(y1).
  Vec3 leaf_to_world(const Vec3& y) const {
    if (y[0] < medial_.t_min() || y[0] > medial_.t_max())
      throw Error("leaf_to_world: y1 outside the spline domain");
    const FrameAxes f = axes(y[0]);
    return medial_.eval(y[0]) + y[1] * f.W + y[2] * f.V;
  }

  const CubicSpline3& medial() const { return medial_; }
  const CubicSpline3& normal_raw() const { return normal_raw_; }
  double normal_radius() const { return R_; }
  double t_max() const { return medial_.t_max(); }

private:
  CubicSpline3 medial_;
  CubicSpline3 normal_raw_;
  double R_ = 0.0;
};

inline FrameAxes frame_axes(const LeafFrame& frame, double t) { return frame.axes(t); }
inline LeafCoords world_to_leaf(const LeafFrame& frame, const Vec3& x) {
  return frame.world_to_leaf(x);
}
inline Vec3 leaf_to_world(const LeafFrame& frame, const Vec3& y) {
  return frame.leaf_to_world(y);
}

}  // namespace leafsurf
