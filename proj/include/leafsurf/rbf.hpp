#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "leafsurf/common.hpp"
#include "leafsurf/numerics.hpp"

namespace leafsurf {

/// Polyharmonic spline kernel of order m = 2 in dimension D:
/// r^2 log r in 2-D and r^3 in 3-D, with the matching normalization
/// constants 8*pi and 96*pi.
template <int D>
struct Kernel {
  static_assert(D == 2 || D == 3, "kernels instantiated for d = 2, 3 only");
  static constexpr int dimension = D;
  static constexpr int order = 2;

  static constexpr double theta() {
    if constexpr (D == 2) return 8.0 * std::numbers::pi;
    else return 96.0 * std::numbers::pi;
  }

  static double eval(double r) {
    if (r < 0.0) throw Error("kernel_eval: negative radius");
    if constexpr (D == 2) {
      return r == 0.0 ? 0.0 : r * r * std::log(r);
    } else {
      return r * r * r;
    }
  }
};

template <int D>
inline double kernel_eval(const Kernel<D>&, double r) {
  return Kernel<D>::eval(r);
}

/// One local smoothed RBF interpolant: a weighted sum of polyharmonic
/// kernels at the data sites plus a linear polynomial tail {1, x_1..x_d}.
template <int D>
struct LocalRBF {
  std::vector<Vec<D>> centers;
  Eigen::VectorXd lambda;  // N kernel coefficients
  Eigen::VectorXd a;       // D+1 polynomial coefficients, constant first
  double rho = 0.0;
  double kkt_residual = 0.0;

  double eval(const Vec<D>& x) const {
    double sum = a[0];
    for (int k = 0; k < D; ++k) sum += a[k + 1] * x[k];
    const std::size_t N = centers.size();
    for (std::size_t j = 0; j < N; ++j) {
      sum += lambda[j] * Kernel<D>::eval((x - centers[j]).norm());
    }
    return sum;
  }
};

/// Fits one smoothed RBF interpolant by the penalized least-squares system
///   (A + rho*N/theta I) lambda + P a = f,   P^T lambda = 0.
/// rho = 0 gives exact interpolation. Values are centered before solving
/// and restored through the constant tail term.
template <int D>
inline LocalRBF<D> fit_local(std::span<const Vec<D>> sites,
                             std::span<const double> values, double rho) {
  const std::size_t N = sites.size();
  const int n = D + 1;
  if (values.size() != N) throw Error("fit_local: sites/values count mismatch");
  if (static_cast<int>(N) < n)
    throw Error("fit_local: needs at least " + std::to_string(n) + " samples, got " +
                std::to_string(N));
  if (rho < 0.0) throw Error("fit_local: rho must be nonnegative");

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(N);

  SaddleSystem sys;
  sys.A.resize(N, N);
  sys.P.resize(N, n);
  sys.rhs.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    sys.A(i, i) = 0.0;
    for (std::size_t j = i + 1; j < N; ++j) {
      const double v = Kernel<D>::eval((sites[i] - sites[j]).norm());
      sys.A(i, j) = v;
      sys.A(j, i) = v;
    }
    sys.P(i, 0) = 1.0;
    for (int k = 0; k < D; ++k) sys.P(i, k + 1) = sites[i][k];
    sys.rhs[i] = values[i] - mean;
  }
  sys.sigma = rho * static_cast<double>(N) / Kernel<D>::theta();

  SaddleSolution sol;
  try {
    sol = solve_saddle(sys);
  } catch (const Error& e) {
    throw Error("fit_local: degenerate sample geometry (" + std::string(e.what()) + ")");
  }

  LocalRBF<D> rbf;
  rbf.centers.assign(sites.begin(), sites.end());
  rbf.lambda = std::move(sol.lambda);
  rbf.a = std::move(sol.a);
  rbf.a[0] += mean;
  rbf.rho = rho;
  rbf.kkt_residual = sol.kkt_residual;
  return rbf;
}

template <int D>
inline LocalRBF<D> fit_local(const LabeledPoints<D>& samples, double rho) {
  return fit_local<D>(std::span<const Vec<D>>(samples.sites),
                      std::span<const double>(samples.values), rho);
}

template <int D>
inline double eval_local(const LocalRBF<D>& rbf, const Vec<D>& x) {
  return rbf.eval(x);
}

}  // namespace leafsurf
