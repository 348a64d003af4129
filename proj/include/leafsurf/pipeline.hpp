#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <omp.h>

#include "leafsurf/archive.hpp"
#include "leafsurf/config.hpp"
#include "leafsurf/io.hpp"
#include "leafsurf/meshing.hpp"
#include "leafsurf/multiscale.hpp"
#include "leafsurf/synthetic.hpp"

namespace leafsurf {

struct StageTiming {
  std::string name;
  double seconds = 0.0;
  std::string detail;
};

namespace pipeline_detail {

class StageClock {
public:
  StageClock(std::vector<StageTiming>& timings, std::ostream& log)
      : timings_(timings), log_(log) {}

  template <class Fn>
  auto run(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(name, start);
    } else {
      auto result = fn();
      record(name, start);
      return result;
    }
  }

  void annotate(const std::string& detail) {
    if (!timings_.empty()) timings_.back().detail = detail;
  }

private:
  void record(const std::string& name,
              std::chrono::steady_clock::time_point start) {
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    timings_.push_back({name, s, ""});
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%8.2f s", s);
    log_ << "  " << buf << "  " << name << "\n" << std::flush;
  }

  std::vector<StageTiming>& timings_;
  std::ostream& log_;
};

/// Deletes the registered paths unless disarmed; keeps failed runs from
/// leaving partial outputs behind.
class OutputGuard {
public:
  ~OutputGuard() {
    if (armed_) {
      for (const auto& p : paths_) {
        std::error_code ec;
        std::filesystem::remove(p, ec);
      }
    }
  }
  void add(const std::filesystem::path& p) { paths_.push_back(p); }
  void disarm() { armed_ = false; }

private:
  std::vector<std::filesystem::path> paths_;
  bool armed_ = true;
};

}  // namespace pipeline_detail

/// Extracts the implicit micro-scale surface over one rectangular window of
/// the flattened leaf plane. The lattice lives in offset leaf coordinates
/// (the macro height is added back per vertex), so the blended field is
/// evaluated directly and the triangulation is independent of the frame
/// curvature.
inline TriangleMesh extract_implicit_mesh(const MultiScaleField& field,
                                          const BoundingBox<2>& window, double z_lo,
                                          double z_hi, double h) {
  if (!(h > 0.0)) throw Error("extract_implicit_mesh: spacing must be positive");
  if (!(z_hi > z_lo)) throw Error("extract_implicit_mesh: empty z range");

  Lattice grid;
  grid.origin = Vec3(window.lo[0], window.lo[1], z_lo);
  grid.h = h;
  grid.dims = {static_cast<int>(std::floor(window.extent()[0] / h)) + 1,
               static_cast<int>(std::floor(window.extent()[1] / h)) + 1,
               static_cast<int>(std::floor((z_hi - z_lo) / h)) + 1};

  const auto& shape = field.heightmap().shape;
  PointMask mask = [&](const Vec3& p) { return shape.contains(Vec2(p[0], p[1])); };
  // Lattice points beyond the blended field's ball coverage behave like
  // masked points; the iso-surface itself is always well inside.
  ScalarField f = [&](const Vec3& p) {
    try {
      return field.eval_at_star(p);
    } catch (const OutsideDomainError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  TriangleMesh mesh = marching_tetrahedra(f, grid, 0.0, mask);

  // Lift the vertices from offset coordinates back to the world.
  const std::ptrdiff_t nv = static_cast<std::ptrdiff_t>(mesh.vertices.size());
  std::string err;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t v = 0; v < nv; ++v) {
    try {
      const Vec3& z = mesh.vertices[v];
      const double height = field.heightmap().eval(z[0], z[1]);
      mesh.vertices[v] =
          field.frame().leaf_to_world(Vec3(z[0], z[1], z[2] + height));
    } catch (const std::exception& e) {
#pragma omp critical
      if (err.empty()) err = std::string("extract_implicit_mesh: ") + e.what();
    }
  }
  if (!err.empty()) throw Error(err);
  return mesh;
}

/// The tile copy whose footprint lies closest to the centre of the
/// flattened leaf domain; the default window for mesh extraction.
inline BoundingBox<2> central_tile_window(const MultiScaleField& field) {
  const auto& micro = field.micro();
  const auto& layout = field.layout();
  const Vec2 domain_c = field.heightmap().domain.center();
  const Vec2 tile_c(0.5 * (micro.extent.lo[0] + micro.extent.hi[0]),
                    0.5 * (micro.extent.lo[1] + micro.extent.hi[1]));
  int q1 = static_cast<int>(std::round((domain_c[0] - tile_c[0]) / layout.tile_extent[0]));
  int q2 = static_cast<int>(std::round((domain_c[1] - tile_c[1]) / layout.tile_extent[1]));
  q1 = std::clamp(q1, layout.q1_min, layout.q1_max);
  q2 = std::clamp(q2, layout.q2_min, layout.q2_max);

  BoundingBox<2> window;
  const Vec3 s = layout.displacement(q1, q2);
  window.expand(Vec2(micro.extent.lo[0] + s[0], micro.extent.lo[1] + s[1]));
  window.expand(Vec2(micro.extent.hi[0] + s[0], micro.extent.hi[1] + s[1]));
  return window;
}

struct ReconstructOutputs {
  MultiScaleField field;
  TriangleMesh micro_mesh;
  TriangleMesh macro_mesh;
  double f_surface = 0.0;
  std::vector<StageTiming> timings;
  std::filesystem::path archive_file;
  std::filesystem::path micro_mesh_file;
  std::filesystem::path macro_mesh_file;
};

/// Full reconstruction: macro cloud + control points + micro volume in,
/// coefficient archive + micro/macro meshes out. Per-stage wall times are
/// logged and returned. On failure every output written so far is removed.
inline ReconstructOutputs run_reconstruct(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.cloud.empty() || cfg.control_points.empty() || cfg.volume.empty())
    throw Error("reconstruct: cloud, control_points and volume paths are required");
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  Eigen::setNbThreads(1);  // the outer loops own the parallelism

  ReconstructOutputs out;
  pipeline_detail::StageClock clock(out.timings, log);
  pipeline_detail::OutputGuard guard;
  std::filesystem::create_directories(cfg.output_dir);

  std::map<std::string, std::uint64_t> hashes;
  auto [cloud, controls, volume] = clock.run("load inputs", [&] {
    auto c = load_point_cloud(cfg.cloud);
    auto k = load_point_cloud(cfg.control_points);
    auto v = load_volume(cfg.volume);
    hashes["cloud"] = hash_file(cfg.cloud);
    hashes["control_points"] = hash_file(cfg.control_points);
    if (!std::filesystem::is_directory(cfg.volume))
      hashes["volume"] = hash_file(cfg.volume);
    return std::tuple(std::move(c), std::move(k), std::move(v));
  });
  log << "    cloud: " << cloud.size() << " points, volume: " << volume.dims[0] << "x"
      << volume.dims[1] << "x" << volume.dims[2] << "\n";

  out.f_surface = cfg.has_f_surface() ? cfg.f_surface : clock.run("estimate threshold", [&] {
    return estimate_threshold(volume);
  });
  log << "    f_surface = " << out.f_surface << "\n";

  LeafFrame frame = clock.run("fit leaf coordinate frame", [&] {
    return LeafFrame::build(cloud, controls, cfg.normal_radius);
  });

  HeightMap heightmap = clock.run("fit macro-scale height map", [&] {
    MacroFitParams mp;
    mp.rho = cfg.rho_macro;
    mp.capacity = cfg.capacity;
    mp.overlap = cfg.overlap;
    mp.alpha = cfg.alpha;
    return fit_macro_heightmap(cloud, frame, mp);
  });
  log << "    height map: " << heightmap.field.size() << " subdomains, "
      << heightmap.dropped_points << " points dropped at the frame boundary\n";

  MicroPatch micro = clock.run("fit micro-scale implicit patch", [&] {
    MicroFitParams mp;
    mp.rho = cfg.rho_micro;
    mp.capacity = cfg.capacity;
    mp.overlap = cfg.overlap;
    mp.band = cfg.band;
    mp.stride = cfg.stride;
    return fit_micro_implicit(volume, out.f_surface, mp);
  });
  log << "    micro patch: " << micro.field.size() << " subdomains\n";

  TilingLayout layout = build_tiling(micro, heightmap.domain);
  out.field = MultiScaleField(std::move(frame), std::move(heightmap), std::move(micro),
                              layout);
  log << "    tiling: " << layout.copy_count() << " copies\n";

  out.archive_file = cfg.archive_path();
  clock.run("write coefficient archive", [&] {
    guard.add(out.archive_file);
    CoefficientArchive::from_field(out.field, cfg.to_text(), hashes).save(out.archive_file);
  });

  const std::string ext = cfg.mesh_format == "obj" ? ".obj" : ".ply";
  const MeshFormat fmt = cfg.mesh_format == "obj" ? MeshFormat::Obj : MeshFormat::PlyBinary;

  out.micro_mesh = clock.run("polygonize micro-scale surface", [&] {
    const BoundingBox<2> window = central_tile_window(out.field);
    const auto& ext3 = out.field.micro().extent;
    return extract_implicit_mesh(out.field, window, ext3.lo[2] - 2.0 * cfg.h_micro,
                                 ext3.hi[2] + 2.0 * cfg.h_micro, cfg.h_micro);
  });
  log << "    micro mesh: " << out.micro_mesh.vertices.size() << " vertices, "
      << out.micro_mesh.triangles.size() << " triangles\n";

  out.macro_mesh = clock.run("sample macro-scale height map", [&] {
    return sample_heightmap_mesh(out.field.heightmap(), out.field.frame(), cfg.h_macro);
  });

  clock.run("write meshes", [&] {
    out.micro_mesh_file = std::filesystem::path(cfg.output_dir) / ("micro_mesh" + ext);
    out.macro_mesh_file = std::filesystem::path(cfg.output_dir) / ("macro_mesh" + ext);
    guard.add(out.micro_mesh_file);
    guard.add(out.macro_mesh_file);
    save_mesh(out.micro_mesh, out.micro_mesh_file, fmt);
    save_mesh(out.macro_mesh, out.macro_mesh_file, fmt);
  });

  double total = 0.0;
  for (const auto& t : out.timings) total += t.seconds;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%8.2f s", total);
  log << "  " << buf << "  total\n";

  guard.disarm();
  return out;
}

/// Writes the synthetic fixture (cloud, control points, volume, and a
/// ready-to-use config file) into a directory.
inline void write_synthetic_fixture(const SynthParams& params,
                                    const std::filesystem::path& dir, std::ostream& log) {
  std::filesystem::create_directories(dir);
  const SyntheticLeaf leaf(params);
  save_point_cloud(leaf.cloud(), dir / "cloud.txt");
  save_point_cloud(leaf.control_points(), dir / "control_points.txt");
  save_volume_raw(leaf.volume(), dir / "volume.raw");

  PipelineConfig cfg;
  cfg.cloud = (dir / "cloud.txt").string();
  cfg.control_points = (dir / "control_points.txt").string();
  cfg.volume = (dir / "volume.raw").string();
  cfg.output_dir = dir.string();
  cfg.f_surface = 0.5;  // the indicator volume crosses the surface at one half
  // The generated cloud carries substantial normal noise; the library-wide
  // rho default near-interpolates, which is right for clean scans but keeps
  // the noise. This level smooths the fixture's noise to ~sigma while
  // leaving the gentle bow and twist intact.
  cfg.rho_macro = 1e-2;
  cfg.seed = params.seed;
  std::ofstream(dir / "reconstruct.cfg") << cfg.to_text();

  log << "synthetic fixture: " << leaf.cloud().size() << " cloud points, volume "
      << leaf.volume().dims[0] << "x" << leaf.volume().dims[1] << "x"
      << leaf.volume().dims[2] << " -> " << dir.string() << "\n";
}

struct BenchRun {
  std::size_t n = 0;
  std::size_t subdomains = 0;
  double seconds = 0.0;
};

/// Times the partition-of-unity fit at increasing point counts on a smooth
/// synthetic 2-D height field.
inline std::vector<BenchRun> run_bench(const std::vector<std::size_t>& sizes,
                                       std::size_t capacity, double overlap, double rho,
                                       std::uint64_t seed, std::ostream& log) {
  Eigen::setNbThreads(1);
  std::vector<BenchRun> runs;
  for (std::size_t n : sizes) {
    std::mt19937_64 gen(seed);
    LabeledPoints<2> samples;
    samples.sites.reserve(n);
    samples.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 p(synth_detail::uniform01(gen), synth_detail::uniform01(gen));
      samples.sites.push_back(p);
      samples.values.push_back(std::sin(5.0 * p[0]) * std::cos(4.0 * p[1]) +
                               0.2 * std::sin(17.0 * p[0] * p[1]));
    }
    const auto start = std::chrono::steady_clock::now();
    PUField<2> field = fit_pu<2>(samples, rho, capacity, overlap);
    BenchRun run;
    run.n = n;
    run.subdomains = field.size();
    run.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    runs.push_back(run);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "  n = %8zu  subdomains = %5zu  fit = %8.2f s\n",
                  run.n, run.subdomains, run.seconds);
    log << buf << std::flush;
  }
  return runs;
}

}  // namespace leafsurf
