#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "leafsurf/reconstruction.hpp"
#include "leafsurf/synthetic.hpp"

using namespace leafsurf;

namespace {

VoxelVolume bimodal_volume(std::uint64_t seed, double air_mu, double leaf_mu,
                           double sigma, int n = 24) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> air(air_mu, sigma), leaf(leaf_mu, sigma);
  std::bernoulli_distribution is_leaf(0.4);
  VoxelVolume v;
  v.dims = {n, n, n};
  v.intensities.resize(static_cast<std::size_t>(n) * n * n);
  for (auto& f : v.intensities) {
    const double raw = is_leaf(gen) ? leaf(gen) : air(gen);
    f = static_cast<float>(std::clamp(raw, 1e-6, 1.0));
  }
  return v;
}

}  // namespace

TEST_CASE("estimate_threshold separates a bimodal histogram") {
  const VoxelVolume v = bimodal_volume(1, 0.11, 0.55, 0.04);
  const double t = estimate_threshold(v);
  CHECK(t > 0.2);
  CHECK(t < 0.45);
}

TEST_CASE("estimate_threshold refuses unimodal data") {
  VoxelVolume v;
  v.dims = {16, 16, 16};
  std::mt19937_64 gen(2);
  std::normal_distribution<double> one(0.5, 0.05);
  v.intensities.resize(4096);
  for (auto& f : v.intensities)
    f = static_cast<float>(std::clamp(one(gen), 1e-6, 1.0));
  CHECK_THROWS_AS(estimate_threshold(v), Error);
}

TEST_CASE("estimate_threshold ignores exactly-zero padding voxels") {
  VoxelVolume v = bimodal_volume(3, 0.15, 0.6, 0.04);
  // add a big block of zero padding; it must not become a third mode
  for (std::size_t i = 0; i < v.intensities.size() / 3; ++i) v.intensities[i] = 0.0f;
  const double t = estimate_threshold(v);
  CHECK(t > 0.2);
  CHECK(t < 0.5);
}

TEST_CASE("select_voxels keeps the band at full resolution plus a coarse lattice") {
  VoxelVolume v;
  v.dims = {16, 16, 16};
  v.spacing = Vec3(0.5, 0.5, 0.5);
  v.origin = Vec3(1.0, 2.0, 3.0);
  v.intensities.resize(4096);
  // intensity rises along z: a flat "surface" mid-volume
  for (int k = 0; k < 16; ++k)
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i)
        v.intensities[v.linear(i, j, k)] = static_cast<float>(k / 15.0);

  const double f_surface = 0.5;
  const LabeledPoints<3> sel = select_voxels(v, f_surface, 0.1, 4);
  REQUIRE(!sel.sites.empty());
  for (std::size_t s = 0; s < sel.size(); ++s) {
    // recover the voxel index from the centre coordinates
    const Vec3 rel = sel.sites[s] - v.origin;
    const int i = static_cast<int>(rel[0] / 0.5 - 0.5 + 0.25);
    const int j = static_cast<int>(rel[1] / 0.5 - 0.5 + 0.25);
    const int k = static_cast<int>(rel[2] / 0.5 - 0.5 + 0.25);
    const double f = v.at(i, j, k);
    CHECK(sel.values[s] == f - f_surface);
    const bool in_band = std::abs(f - f_surface) <= 0.1;
    const bool on_lattice = i % 4 == 0 && j % 4 == 0 && k % 4 == 0;
    CHECK((in_band || on_lattice));
  }
  // every in-band voxel present
  std::size_t band_count = 0;
  for (float f : v.intensities)
    if (std::abs(f - f_surface) <= 0.1) ++band_count;
  std::size_t found = 0;
  for (double val : sel.values)
    if (std::abs(val) <= 0.1) ++found;
  CHECK(found == band_count);

  // stride <= 0 keeps only the band
  const LabeledPoints<3> band_only = select_voxels(v, f_surface, 0.1, 0);
  CHECK(band_only.size() == band_count);
}

TEST_CASE("align_micro maps the thin direction onto z and centres the data") {
  // a slab tilted in space, values positive inside
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const Vec3 n = Vec3(0.3, -0.2, 1.0).normalized();
  const Vec3 u = n.cross(Vec3::UnitX()).normalized();
  const Vec3 w = n.cross(u);
  LabeledPoints<3> pts;
  for (int i = 0; i < 2000; ++i) {
    const Vec3 p = Vec3(3, 4, 5) + unif(gen) * u + unif(gen) * w + 0.05 * unif(gen) * n;
    pts.sites.push_back(p);
    pts.values.push_back(unif(gen) > 0 ? 0.4 : -0.4);
  }
  auto [align, transformed] = align_micro(pts);

  // rotation is orthonormal
  CHECK((align.rotation * align.rotation.transpose() - Eigen::Matrix3d::Identity())
            .norm() < 1e-12);
  // thin axis now along z
  std::vector<Vec3> solid;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (pts.values[i] > 0) solid.push_back(transformed.sites[i]);
  const Vec3 nz = pca_normal(solid);
  CHECK(std::abs(std::abs(nz.z()) - 1.0) < 1e-3);
  // centroid of the solid points at the origin
  Vec3 c = Vec3::Zero();
  for (const auto& p : solid) c += p;
  CHECK((c / solid.size()).norm() < 1e-9);
  // apply / invert round trip
  for (int i = 0; i < 10; ++i) {
    const Vec3 p(unif(gen), unif(gen), unif(gen));
    CHECK((align.invert(align.apply(p)) - p).norm() < 1e-12);
  }
}

TEST_CASE("fit_micro_implicit zero level matches the generating surface") {
  // small analytic tile: slab with a sine relief, soft indicator volume
  SynthParams sp;
  sp.patch_size = 0.6;
  sp.voxel = 0.01;
  sp.hair_count = 0;
  sp.ridge_amplitude = 0.05;
  sp.ridge_period = 0.2;
  sp.thickness = 0.12;
  sp.cloud_count = 10;
  const SyntheticLeaf leaf(sp);

  MicroFitParams mp;
  mp.capacity = 400;
  mp.stride = 4;
  const MicroPatch patch = fit_micro_implicit(leaf.volume(), 0.5, mp);

  // probe straight down through the relief: the sign change of the fitted
  // field must bracket the true surface height within a voxel
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> unif(0.15, 0.45);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const double x = unif(gen), y = unif(gen);
    const double truth = leaf.ridge_height(y);
    // the alignment is close to a pure translation here
    auto value = [&](double z) { return patch.eval(patch.alignment.apply(Vec3(x, y, z))); };
    double lo = truth - 3.0 * sp.voxel, hi = truth + 3.0 * sp.voxel;
    REQUIRE(value(lo) > 0.0);
    REQUIRE(value(hi) < 0.0);
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (value(mid) > 0.0 ? lo : hi) = mid;
    }
    CHECK(std::abs(0.5 * (lo + hi) - truth) < sp.voxel);
    ++checked;
  }
  CHECK(checked == 40);

  // tile extent equals the full voxel box, transformed
  const Vec3 ext = patch.extent.extent();
  CHECK(std::abs(ext[0] - sp.patch_size) < 0.05 * sp.patch_size);
  CHECK(std::abs(ext[1] - sp.patch_size) < 0.05 * sp.patch_size);
}

TEST_CASE("fit_macro_heightmap recovers a known height field") {
  // gently bowed synthetic blade, no noise: the height map should match
  // the analytic mid-surface closely away from the rim
  SynthParams sp;
  sp.length = 30.0;
  sp.width = 6.0;
  sp.bow = 0.5;
  sp.twist_deg = 5.0;
  sp.noise_sigma = 0.0;
  sp.cloud_count = 20000;
  const SyntheticLeaf leaf(sp);
  const LeafFrame frame = LeafFrame::build(leaf.cloud(), leaf.control_points(), 2.0);

  MacroFitParams mp;
  mp.rho = 1e-8;
  const HeightMap hm = fit_macro_heightmap(leaf.cloud(), frame, mp);

  // evaluate the height map against true mid-surface points
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> uu(3.0, 27.0);
  std::uniform_real_distribution<double> uw(-2.4, 2.4);
  for (int i = 0; i < 200; ++i) {
    const Vec3 x = leaf.surface_point(uu(gen), uw(gen));
    const LeafCoords lc = frame.world_to_leaf(x);
    REQUIRE_FALSE(lc.clamped);
    REQUIRE(hm.shape.contains(Vec2(lc.y[0], lc.y[1])));
    CHECK(std::abs(hm.eval(lc.y[0], lc.y[1]) - lc.y[2]) < 5e-3);
  }
}
