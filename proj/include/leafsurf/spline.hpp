#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "leafsurf/common.hpp"
#include "leafsurf/numerics.hpp"

namespace leafsurf {

/// Interpolating cubic spline through 3-vector data with natural end
/// conditions (second derivative zero at both ends). C2 at interior knots.
class CubicSpline3 {
public:
  CubicSpline3() = default;

  /// Fits an interpolating natural cubic spline: spline(params[j]) == points[j].
  static CubicSpline3 fit(std::vector<double> params, std::vector<Vec3> points) {
    const std::size_t K = params.size();
    if (K < 2) throw Error("CubicSpline3: needs at least 2 points");
    if (points.size() != K) throw Error("CubicSpline3: params/points count mismatch");
    for (std::size_t j = 1; j < K; ++j)
      if (!(params[j] > params[j - 1]))
        throw Error("CubicSpline3: params must be strictly increasing");

    CubicSpline3 s;
    s.knots_ = std::move(params);
    s.values_ = std::move(points);
    s.second_ = solve_natural(s.knots_, s.values_);
    return s;
  }

  Vec3 eval(double t) const {
    const auto [i, h, A, B] = locate(t);
    const Vec3& y0 = values_[i];
    const Vec3& y1 = values_[i + 1];
    return A * y0 + B * y1 +
           (h * h / 6.0) * ((A * A * A - A) * second_[i] + (B * B * B - B) * second_[i + 1]);
  }

  Vec3 derivative(double t) const {
    const auto [i, h, A, B] = locate(t);
    return (values_[i + 1] - values_[i]) / h -
           (3.0 * A * A - 1.0) / 6.0 * h * second_[i] +
           (3.0 * B * B - 1.0) / 6.0 * h * second_[i + 1];
  }

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<Vec3>& control_points() const { return values_; }
  const std::vector<Vec3>& second_derivatives() const { return second_; }
  double t_min() const { return knots_.front(); }
  double t_max() const { return knots_.back(); }
  std::size_t size() const { return knots_.size(); }

  /// Direct constructor from precomputed coefficients (deserialization).
  static CubicSpline3 from_coefficients(std::vector<double> knots,
                                        std::vector<Vec3> values,
                                        std::vector<Vec3> second) {
    if (knots.size() < 2 || knots.size() != values.size() ||
        knots.size() != second.size())
      throw Error("CubicSpline3: inconsistent coefficient arrays");
    CubicSpline3 s;
    s.knots_ = std::move(knots);
    s.values_ = std::move(values);
    s.second_ = std::move(second);
    return s;
  }

private:
  struct Segment {
    std::size_t i;
    double h, A, B;
  };

  Segment locate(double t) const {
    // Clamp to the end segments; extrapolation uses the end cubics.
    std::size_t i;
    if (t <= knots_.front()) {
      i = 0;
    } else if (t >= knots_.back()) {
      i = knots_.size() - 2;
    } else {
      i = static_cast<std::size_t>(
              std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin()) - 1;
    }
    const double h = knots_[i + 1] - knots_[i];
    const double A = (knots_[i + 1] - t) / h;
    const double B = (t - knots_[i]) / h;
    return {i, h, A, B};
  }

  static std::vector<Vec3> solve_natural(const std::vector<double>& t,
                                         const std::vector<Vec3>& y) {
    const std::size_t K = t.size();
    std::vector<Vec3> M(K, Vec3::Zero());
    if (K == 2) return M;

    // Tridiagonal system for interior second derivatives, Thomas algorithm.
    const std::size_t n = K - 2;
    std::vector<double> diag(n), upper(n), lower(n);
    std::vector<Vec3> rhs(n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t i = j + 1;
      const double h0 = t[i] - t[i - 1];
      const double h1 = t[i + 1] - t[i];
      lower[j] = h0 / 6.0;
      diag[j] = (h0 + h1) / 3.0;
      upper[j] = h1 / 6.0;
      rhs[j] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    for (std::size_t j = 1; j < n; ++j) {
      const double w = lower[j] / diag[j - 1];
      diag[j] -= w * upper[j - 1];
      rhs[j] -= w * rhs[j - 1];
    }
    M[n] = rhs[n - 1] / diag[n - 1];
    for (std::size_t j = n - 1; j-- > 0;) {
      M[j + 1] = (rhs[j] - upper[j] * M[j + 2]) / diag[j];
    }
    return M;
  }

  std::vector<double> knots_;
  std::vector<Vec3> values_;   // control points at the knots
  std::vector<Vec3> second_;   // second derivatives at the knots
};

/// Reparameterizes a spline so knot spacing equals the arc length traversed
/// between consecutive control points (16-node Gauss-Legendre per segment),
/// then refits through the same control points at the new parameters.
inline std::pair<std::vector<double>, CubicSpline3> reparam_arclength(
    const CubicSpline3& spline) {
  const auto& knots = spline.knots();
  const std::size_t K = knots.size();
  std::vector<double> t(K, 0.0);
  for (std::size_t j = 1; j < K; ++j) {
    const double len = GaussLegendre16::integrate(
        [&](double s) { return spline.derivative(s).norm(); }, knots[j - 1], knots[j]);
    if (!(len > 0.0))
      throw Error("reparam_arclength: zero-length segment between knots " +
                  std::to_string(j - 1) + " and " + std::to_string(j));
    t[j] = t[j - 1] + len;
  }
  CubicSpline3 refit = CubicSpline3::fit(t, spline.control_points());
  return {std::move(t), std::move(refit)};
}

}  // namespace leafsurf
