#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "leafsurf/rbf.hpp"

using namespace leafsurf;

namespace {

template <int D>
std::vector<Vec<D>> random_sites(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<Vec<D>> sites(n);
  for (auto& s : sites)
    for (int k = 0; k < D; ++k) s[k] = unif(gen);
  return sites;
}

}  // namespace

TEST_CASE("kernel values and normalization constants") {
  CHECK(Kernel<2>::eval(0.0) == 0.0);
  CHECK(Kernel<2>::eval(1.0) == 0.0);  // r^2 log r at r = 1
  CHECK(std::abs(Kernel<2>::eval(std::numbers::e) -
                 std::numbers::e * std::numbers::e) < 1e-12);
  CHECK(Kernel<3>::eval(2.0) == 8.0);
  CHECK(std::abs(Kernel<2>::theta() - 8.0 * std::numbers::pi) < 1e-15);
  CHECK(std::abs(Kernel<3>::theta() - 96.0 * std::numbers::pi) < 1e-14);
  CHECK_THROWS_AS(Kernel<2>::eval(-0.5), Error);
}

TEST_CASE("fit_local with rho = 0 interpolates exactly") {
  const auto sites = random_sites<2>(60, 1);
  std::vector<double> values(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i)
    values[i] = std::sin(3.0 * sites[i][0]) + 0.5 * sites[i][1] * sites[i][1];

  const LocalRBF<2> rbf = fit_local<2>(sites, values, 0.0);
  double range = 0.0;
  for (double v : values) range = std::max(range, std::abs(v));
  for (std::size_t i = 0; i < sites.size(); ++i)
    CHECK(std::abs(rbf.eval(sites[i]) - values[i]) < 1e-6 * range);
  CHECK(rbf.kkt_residual < 1e-8);
}

TEST_CASE("fit_local 3-D exact interpolation") {
  const auto sites = random_sites<3>(80, 2);
  std::vector<double> values(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i)
    values[i] = sites[i][0] * sites[i][1] - std::cos(2.0 * sites[i][2]);

  const LocalRBF<3> rbf = fit_local<3>(sites, values, 0.0);
  for (std::size_t i = 0; i < sites.size(); ++i)
    CHECK(std::abs(rbf.eval(sites[i]) - values[i]) < 1e-6);
}

TEST_CASE("affine data is reproduced for any smoothing strength") {
  // the linear tail carries affine functions untouched: the residual
  // penalty is zero there, so smoothing must not bias them
  const auto sites = random_sites<2>(50, 3);
  auto affine = [](const Vec2& p) { return 1.5 - 2.0 * p[0] + 0.75 * p[1]; };
  std::vector<double> values(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) values[i] = affine(sites[i]);

  for (double rho : {0.0, 1e-3, 1.0}) {
    const LocalRBF<2> rbf = fit_local<2>(sites, values, rho);
    const auto probes = random_sites<2>(40, 99);
    for (const auto& p : probes)
      CHECK(std::abs(rbf.eval(p) - affine(p)) < 1e-8);
  }
}

TEST_CASE("3-D affine reproduction under smoothing") {
  const auto sites = random_sites<3>(60, 4);
  auto affine = [](const Vec3& p) { return -0.3 + p[0] + 2.0 * p[1] - 0.5 * p[2]; };
  std::vector<double> values(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) values[i] = affine(sites[i]);

  for (double rho : {0.0, 1e-3, 1.0}) {
    const LocalRBF<3> rbf = fit_local<3>(sites, values, rho);
    const auto probes = random_sites<3>(25, 100);
    for (const auto& p : probes)
      CHECK(std::abs(rbf.eval(p) - affine(p)) < 1e-8);
  }
}

TEST_CASE("smoothing damps noise relative to exact interpolation") {
  const auto sites = random_sites<2>(200, 5);
  std::mt19937_64 gen(6);
  std::normal_distribution<double> noise(0.0, 0.2);
  auto truth = [](const Vec2& p) { return std::sin(2.0 * p[0]) * std::cos(2.0 * p[1]); };
  std::vector<double> values(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) values[i] = truth(sites[i]) + noise(gen);

  const LocalRBF<2> exact = fit_local<2>(sites, values, 0.0);
  const LocalRBF<2> smooth = fit_local<2>(sites, values, 1e-2);

  double err_exact = 0.0, err_smooth = 0.0;
  const auto probes = random_sites<2>(300, 7);
  for (const auto& p : probes) {
    err_exact += std::pow(exact.eval(p) - truth(p), 2);
    err_smooth += std::pow(smooth.eval(p) - truth(p), 2);
  }
  CHECK(err_smooth < err_exact);
}

TEST_CASE("lambda coefficients satisfy the discrete orthogonality constraint") {
  const auto sites = random_sites<2>(70, 8);
  std::vector<double> values(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i)
    values[i] = std::exp(-sites[i].squaredNorm());
  const LocalRBF<2> rbf = fit_local<2>(sites, values, 1e-4);

  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    s0 += rbf.lambda[i];
    s1 += rbf.lambda[i] * sites[i][0];
    s2 += rbf.lambda[i] * sites[i][1];
  }
  CHECK(std::abs(s0) < 1e-9);
  CHECK(std::abs(s1) < 1e-9);
  CHECK(std::abs(s2) < 1e-9);
}

TEST_CASE("fit_local rejects invalid input") {
  const auto sites = random_sites<2>(10, 9);
  std::vector<double> values(9, 0.0);
  CHECK_THROWS_AS((fit_local<2>(sites, values, 0.0)), Error);  // count mismatch
  values.resize(10);
  CHECK_THROWS_AS((fit_local<2>(sites, values, -1.0)), Error);  // negative rho

  // collinear sites: the polynomial block loses rank
  std::vector<Vec2> line;
  std::vector<double> lv;
  for (int i = 0; i < 12; ++i) {
    line.emplace_back(0.1 * i, 0.2 * i);
    lv.push_back(i);
  }
  CHECK_THROWS_AS((fit_local<2>(line, lv, 0.0)), Error);

  // too few samples
  std::vector<Vec2> two = {Vec2(0, 0), Vec2(1, 1)};
  std::vector<double> tv = {0.0, 1.0};
  CHECK_THROWS_AS((fit_local<2>(two, tv, 0.0)), Error);
}
