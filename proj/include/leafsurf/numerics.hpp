#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <utility>

#include "leafsurf/common.hpp"

namespace leafsurf {

/// Symmetric saddle-point system
///   (A + sigma I) lambda + P a = rhs,   P^T lambda = 0,
/// with a dense symmetric data block A (N x N) and a small polynomial
/// block P (N x n, n < N).
struct SaddleSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd P;
  Eigen::VectorXd rhs;
  double sigma = 0.0;
};

struct SaddleSolution {
  Eigen::VectorXd lambda;
  Eigen::VectorXd a;
  double kkt_residual = 0.0;  // inf-norm of the full KKT residual
};

/// Solves the constrained system by direct factorization of the augmented
/// (N+n) x (N+n) matrix. N per subdomain is capped by the partition of
/// unity, so dense is appropriate.
inline SaddleSolution solve_saddle(const SaddleSystem& sys) {
  const Eigen::Index N = sys.A.rows();
  const Eigen::Index n = sys.P.cols();
  if (sys.A.cols() != N || sys.P.rows() != N || sys.rhs.size() != N)
    throw Error("solve_saddle: inconsistent dimensions");
  if (n >= N) throw Error("solve_saddle: polynomial block not smaller than data block");

  // Rank of the thin P block is cheap to check and catches degenerate site
  // geometry (e.g. all sites collinear with a linear polynomial tail).
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sys.P);
  if (qr.rank() < n)
    throw Error("solve_saddle: polynomial matrix P is rank-deficient "
                "(degenerate site geometry, e.g. collinear sites)");

  Eigen::MatrixXd M(N + n, N + n);
  M.topLeftCorner(N, N) = sys.A;
  M.topLeftCorner(N, N).diagonal().array() += sys.sigma;
  M.topRightCorner(N, n) = sys.P;
  M.bottomLeftCorner(n, N) = sys.P.transpose();
  M.bottomRightCorner(n, n).setZero();

  Eigen::VectorXd b(N + n);
  b.head(N) = sys.rhs;
  b.tail(n).setZero();

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  Eigen::VectorXd sol = lu.solve(b);

  const double resid = (M * sol - b).lpNorm<Eigen::Infinity>();
  const double scale = 1.0 + sys.rhs.lpNorm<Eigen::Infinity>();
  if (!sol.allFinite() || resid > 1e-6 * scale)
    throw Error("solve_saddle: augmented matrix is singular or severely "
                "ill-conditioned (KKT residual " + std::to_string(resid) + ")");

  SaddleSolution out;
  out.lambda = sol.head(N);
  out.a = sol.tail(n);
  out.kkt_residual = resid;
  return out;
}

/// Bounded scalar minimization by Brent's method with golden-section
/// fallback. Never evaluates f outside [lo, hi]. tol <= 0 selects the
/// default 1e-8 * (hi - lo).
inline double brent_min(const std::function<double(double)>& f, double lo,
                        double hi, double tol = -1.0) {
  if (!(lo < hi)) throw Error("brent_min: requires lo < hi");
  if (tol <= 0.0) tol = 1e-8 * (hi - lo);

  const double gold = 0.3819660112501051;
  double a = lo, b = hi;
  double x = a + gold * (b - a);
  double w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int iter = 0; iter < 200; ++iter) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol + 1e-12 * std::abs(x);
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;

    bool use_golden = true;
    if (std::abs(e) > tol1) {
      // parabolic interpolation through x, w, v
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) &&
          p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (xm >= x) ? tol1 : -tol1;
        use_golden = false;
      }
    }
    if (use_golden) {
      e = (x >= xm) ? a - x : b - x;
      d = gold * e;
    }
    const double u = (std::abs(d) >= tol1) ? x + d : x + (d >= 0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return std::clamp(x, lo, hi);
}

/// Unit normal of a near-planar point set: the eigenvector of the
/// covariance matrix belonging to the smallest eigenvalue. Sign is
/// unspecified; the caller orients.
inline Vec3 pca_normal(std::span<const Vec3> points) {
  if (points.size() < 3) throw Error("pca_normal: needs at least 3 points");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Vec3 evals = eig.eigenvalues();  // ascending
  const double scale = std::max(evals[2], 1e-300);
  if ((evals[1] - evals[0]) <= 1e-12 * scale)
    throw Error("pca_normal: ambiguous normal, two smallest eigenvalues "
                "coincide (collinear or degenerate points)");
  return eig.eigenvectors().col(0).normalized();
}

/// 16-node Gauss-Legendre rule on [-1, 1].
struct GaussLegendre16 {
  static constexpr std::array<double, 8> nodes = {
      0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
      0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
      0.9445750230732326, 0.9894009349916499};
  static constexpr std::array<double, 8> weights = {
      0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
      0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
      0.0622535239386479, 0.0271524594117541};

  /// Integrates f over [a, b].
  template <class F>
  static double integrate(const F& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (int i = 0; i < 8; ++i) {
      sum += weights[i] * (f(mid + half * nodes[i]) + f(mid - half * nodes[i]));
    }
    return half * sum;
  }
};

}  // namespace leafsurf
