#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "leafsurf/archive.hpp"
#include "leafsurf/config.hpp"
#include "leafsurf/io.hpp"
#include "leafsurf/multiscale.hpp"
#include "leafsurf/synthetic.hpp"

using namespace leafsurf;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("leafsurf_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("ascii point cloud round trip with comments") {
  TempDir tmp;
  const auto file = tmp.path / "cloud.txt";
  std::vector<Vec3> pts = {Vec3(1.5, -2.25, 1e-17), Vec3(0.1, 0.2, 0.3),
                           Vec3(12345.6789, -0.001, 7.0)};
  save_point_cloud(pts, file);
  {
    std::ofstream app(file, std::ios::app);
    app << "# trailing comment\n\n  0 0 0  # inline\n";
  }
  const auto back = load_point_cloud(file);
  REQUIRE(back.size() == 4);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(back[i] == pts[i]);
  CHECK(back[3] == Vec3::Zero());
}

TEST_CASE("malformed point cloud lines report the line number") {
  TempDir tmp;
  const auto file = tmp.path / "bad.txt";
  std::ofstream(file) << "1 2 3\n4 5\n";
  CHECK_THROWS_WITH(load_point_cloud(file),
                    Catch::Matchers::ContainsSubstring("line 2"));
  std::ofstream(file) << "1 2 3\n1 2 3 4\n";
  CHECK_THROWS_WITH(load_point_cloud(file),
                    Catch::Matchers::ContainsSubstring("line 2"));
  CHECK_THROWS_AS(load_point_cloud(tmp.path / "missing.txt"), Error);
}

TEST_CASE("PLY point clouds load in ascii and binary form") {
  TempDir tmp;
  const auto ascii = tmp.path / "pts.ply";
  std::ofstream(ascii) << "ply\nformat ascii 1.0\nelement vertex 2\n"
                          "property float x\nproperty float y\nproperty float z\n"
                          "property uchar quality\nend_header\n"
                          "1 2 3 7\n4 5 6 9\n";
  const auto a = load_point_cloud(ascii);
  REQUIRE(a.size() == 2);
  CHECK(a[0] == Vec3(1, 2, 3));
  CHECK(a[1] == Vec3(4, 5, 6));

  const auto bin = tmp.path / "pts_bin.ply";
  {
    std::ofstream out(bin, std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
           "property double x\nproperty double y\nproperty double z\nend_header\n";
    const double data[6] = {1.5, 2.5, 3.5, -1.0, -2.0, -3.0};
    out.write(reinterpret_cast<const char*>(data), sizeof(data));
  }
  const auto b = load_point_cloud(bin);
  REQUIRE(b.size() == 2);
  CHECK(b[0] == Vec3(1.5, 2.5, 3.5));
  CHECK(b[1] == Vec3(-1.0, -2.0, -3.0));
}

TEST_CASE("raw volume round trip preserves every voxel bit") {
  TempDir tmp;
  VoxelVolume v;
  v.dims = {7, 5, 3};
  v.spacing = Vec3(0.01, 0.02, 0.03);
  v.origin = Vec3(-1.0, 2.0, 0.5);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  v.intensities.resize(105);
  for (auto& f : v.intensities) f = static_cast<float>(unif(gen));

  const auto file = tmp.path / "vol.raw";
  save_volume_raw(v, file);
  const VoxelVolume back = load_volume(file);
  CHECK(back.dims == v.dims);
  CHECK(back.spacing == v.spacing);
  CHECK(back.origin == v.origin);
  REQUIRE(back.intensities.size() == v.intensities.size());
  for (std::size_t i = 0; i < v.intensities.size(); ++i)
    CHECK(back.intensities[i] == v.intensities[i]);
}

TEST_CASE("raw volume without a recorded range is min-max normalized") {
  TempDir tmp;
  const auto file = tmp.path / "vol.raw";
  const float data[4] = {10.0f, 20.0f, 30.0f, 40.0f};
  std::ofstream(file, std::ios::binary)
      .write(reinterpret_cast<const char*>(data), sizeof(data));
  std::ofstream(file.string() + ".meta")
      << "dims 4 1 1\nspacing 1 1 1\norigin 0 0 0\n";
  const VoxelVolume v = load_volume(file);
  CHECK(v.intensities[0] == 0.0f);
  CHECK(v.intensities[3] == 1.0f);
  CHECK(std::abs(v.intensities[1] - 1.0f / 3.0f) < 1e-7);
}

TEST_CASE("PGM slice directories load with 8 and 16 bit data") {
  TempDir tmp;
  const auto dir = tmp.path / "slices";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "meta.txt") << "spacing 0.5 0.5 1.0\norigin 1 2 3\n";
  // two 2x2 slices, 8-bit, lexicographic z order
  {
    std::ofstream s0(dir / "slice_000.pgm", std::ios::binary);
    s0 << "P5\n# comment\n2 2\n255\n";
    const unsigned char px[4] = {0, 51, 102, 255};
    s0.write(reinterpret_cast<const char*>(px), 4);
    std::ofstream s1(dir / "slice_001.pgm", std::ios::binary);
    s1 << "P5\n2 2\n255\n";
    const unsigned char qx[4] = {255, 0, 0, 128};
    s1.write(reinterpret_cast<const char*>(qx), 4);
  }
  const VoxelVolume v = load_volume(dir);
  CHECK(v.dims == std::array<int, 3>{2, 2, 2});
  CHECK(v.spacing == Vec3(0.5, 0.5, 1.0));
  CHECK(v.origin == Vec3(1, 2, 3));
  CHECK(v.at(0, 0, 0) == 0.0f);
  CHECK(v.at(1, 1, 0) == 1.0f);
  CHECK(std::abs(v.at(1, 0, 0) - 51.0f / 255.0f) < 1e-7);
  CHECK(v.at(0, 0, 1) == 1.0f);

  // 16-bit slice with mismatched size is an error
  {
    std::ofstream s2(dir / "slice_002.pgm", std::ios::binary);
    s2 << "P5\n3 2\n65535\n";
    const unsigned char px[12] = {};
    s2.write(reinterpret_cast<const char*>(px), 12);
  }
  CHECK_THROWS_WITH(load_volume(dir), Catch::Matchers::ContainsSubstring("differ"));
}

TEST_CASE("mesh round trips through obj and binary ply") {
  TempDir tmp;
  TriangleMesh mesh;
  mesh.vertices = {Vec3(0, 0, 0), Vec3(1.000000001, 0, 0), Vec3(0, 1, 1e-18),
                   Vec3(1, 1, 0.5)};
  mesh.triangles = {{0, 1, 2}, {1, 3, 2}};

  const auto obj = tmp.path / "m.obj";
  save_mesh(mesh, obj, MeshFormat::Obj);
  const TriangleMesh back_obj = load_mesh(obj);
  REQUIRE(back_obj.vertices.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(back_obj.vertices[i] == mesh.vertices[i]);  // %.17g is lossless
  CHECK(back_obj.triangles == mesh.triangles);

  const auto ply = tmp.path / "m.ply";
  save_mesh(mesh, ply, MeshFormat::PlyBinary);
  const TriangleMesh back_ply = load_mesh(ply);
  REQUIRE(back_ply.vertices.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(back_ply.vertices[i] == mesh.vertices[i]);
  CHECK(back_ply.triangles == mesh.triangles);
}

TEST_CASE("config files parse with overrides and reject unknown keys") {
  TempDir tmp;
  const auto file = tmp.path / "run.cfg";
  std::ofstream(file) << "# a comment\nrho_macro = 1e-4\ncapacity = 500\n"
                         "cloud = data/cloud.txt\n\nmesh_format = ply\n";
  PipelineConfig cfg;
  cfg.load_file(file);
  CHECK(cfg.rho_macro == 1e-4);
  CHECK(cfg.capacity == 500);
  CHECK(cfg.cloud == "data/cloud.txt");
  CHECK(cfg.mesh_format == "ply");
  cfg.set("rho_macro", "2.5e-3");
  CHECK(cfg.rho_macro == 2.5e-3);
  cfg.validate();

  CHECK_THROWS_WITH(cfg.set("rho_makro", "1"),
                    Catch::Matchers::ContainsSubstring("unknown key"));
  CHECK_THROWS_AS(cfg.set("capacity", "12.5"), Error);
  CHECK_THROWS_AS(cfg.set("rho_macro", "abc"), Error);

  std::ofstream(file) << "overlap = 0.5\n";
  PipelineConfig bad;
  bad.load_file(file);
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("synthetic generation is deterministic in the seed") {
  SynthParams sp;
  sp.length = 10.0;
  sp.width = 3.0;
  sp.cloud_count = 2000;
  sp.patch_size = 0.4;
  sp.voxel = 0.01;
  sp.hair_count = 3;
  const SyntheticLeaf a(sp), b(sp);
  REQUIRE(a.cloud().size() == b.cloud().size());
  for (std::size_t i = 0; i < a.cloud().size(); ++i)
    CHECK(a.cloud()[i] == b.cloud()[i]);
  REQUIRE(a.volume().intensities.size() == b.volume().intensities.size());
  CHECK(a.volume().intensities == b.volume().intensities);
  CHECK(a.hair_positions() == b.hair_positions());

  sp.seed = 2;
  const SyntheticLeaf c(sp);
  bool differs = false;
  for (std::size_t i = 0; i < a.cloud().size(); ++i)
    if (a.cloud()[i] != c.cloud()[i]) differs = true;
  CHECK(differs);
}

TEST_CASE("coefficient archive round trip evaluates bit-identically") {
  SynthParams sp;
  sp.length = 12.0;
  sp.width = 4.0;
  sp.bow = 0.2;
  sp.cloud_count = 6000;
  sp.noise_sigma = 0.02;
  sp.patch_size = 0.4;
  sp.voxel = 0.01;
  sp.hair_count = 1;
  sp.hair_radius = 0.02;
  sp.hair_height = 0.06;
  sp.ridge_amplitude = 0.015;
  sp.ridge_period = 0.1;
  sp.thickness = 0.06;
  const SyntheticLeaf leaf(sp);
  const LeafFrame frame = LeafFrame::build(leaf.cloud(), leaf.control_points(), 1.2);
  MacroFitParams macro;
  macro.capacity = 400;
  const HeightMap hm = fit_macro_heightmap(leaf.cloud(), frame, macro);
  MicroFitParams mp;
  mp.capacity = 400;
  mp.stride = 4;
  const MicroPatch micro = fit_micro_implicit(leaf.volume(), 0.5, mp);
  const MultiScaleField field(frame, hm, micro, build_tiling(micro, hm.domain));

  TempDir tmp;
  const auto file = tmp.path / "coeff.lsrf";
  CoefficientArchive::from_field(field, "capacity = 400\n", {{"cloud", 0x1234u}})
      .save(file);
  const CoefficientArchive back = CoefficientArchive::load(file);
  REQUIRE(back.complete());
  CHECK(back.config_text == "capacity = 400\n");
  CHECK(back.input_hashes.at("cloud") == 0x1234u);
  const MultiScaleField loaded = back.assemble();

  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u1(2.0, 10.0), u2(-1.2, 1.2), u3(-0.04, 0.04);
  std::size_t evaluated = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 z(u1(gen), u2(gen), u3(gen));
    double a, b;
    try {
      a = field.eval_at_star(z);
    } catch (const OutsideDomainError&) {
      CHECK_THROWS_AS(loaded.eval_at_star(z), OutsideDomainError);
      continue;
    }
    b = loaded.eval_at_star(z);
    CHECK(a == b);  // bit identical, not merely close
    ++evaluated;
  }
  CHECK(evaluated > 800);

  // world-space composition is preserved too
  for (int i = 0; i < 50; ++i) {
    const Vec3 x = leaf.surface_point(u1(gen), 0.5 * u2(gen));
    CHECK(field.eval(x) == loaded.eval(x));
  }

  // partial archives keep their missing sections missing
  CoefficientArchive partial;
  partial.frame = frame;
  const auto pfile = tmp.path / "partial.lsrf";
  partial.save(pfile);
  const CoefficientArchive pback = CoefficientArchive::load(pfile);
  CHECK(pback.frame.has_value());
  CHECK(!pback.heightmap.has_value());
  CHECK(!pback.complete());
  CHECK_THROWS_AS(pback.assemble(), Error);

  // corrupted magic is rejected
  std::ofstream(pfile, std::ios::binary) << "NOTANARCHIVE";
  CHECK_THROWS_AS(CoefficientArchive::load(pfile), Error);
}

TEST_CASE("hash_file distinguishes contents") {
  TempDir tmp;
  std::ofstream(tmp.path / "a") << "hello";
  std::ofstream(tmp.path / "b") << "hello";
  std::ofstream(tmp.path / "c") << "hellp";
  CHECK(hash_file(tmp.path / "a") == hash_file(tmp.path / "b"));
  CHECK(hash_file(tmp.path / "a") != hash_file(tmp.path / "c"));
}
