// Command-line front end for the leafsurf reconstruction library.

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "leafsurf/archive.hpp"
#include "leafsurf/config.hpp"
#include "leafsurf/io.hpp"
#include "leafsurf/pipeline.hpp"

namespace {

using namespace leafsurf;

// Shared `--key value` config handling: every pipeline key becomes an
// option, applied on top of an optional config file.
struct ConfigArgs {
  std::string config_file;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key = value configuration file");
    for (const auto& [key, help] : PipelineConfig::key_help()) {
      cmd->add_option_function<std::string>(
          "--" + key, [this, k = key](const std::string& v) { overrides[k] = v; }, help);
    }
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& [key, value] : overrides) cfg.set(key, value);
    cfg.validate();
    return cfg;
  }
};

int cmd_synth(const SynthParams& params, const std::string& out_dir) {
  write_synthetic_fixture(params, out_dir, std::cout);
  return 0;
}

int cmd_build_frame(const ConfigArgs& args) {
  const PipelineConfig cfg = args.resolve();
  if (cfg.cloud.empty() || cfg.control_points.empty())
    throw Error("build-frame: --cloud and --control_points are required");
  const auto cloud = load_point_cloud(cfg.cloud);
  const auto controls = load_point_cloud(cfg.control_points);

  CoefficientArchive ar;
  const auto path = cfg.archive_path();
  if (std::filesystem::exists(path)) ar = CoefficientArchive::load(path);
  ar.frame = LeafFrame::build(cloud, controls, cfg.normal_radius);
  ar.config_text = cfg.to_text();
  ar.input_hashes["cloud"] = hash_file(cfg.cloud);
  ar.input_hashes["control_points"] = hash_file(cfg.control_points);
  ar.save(path);
  std::cout << "frame: arc length " << ar.frame->t_max() << ", saved to " << path << "\n";
  return 0;
}

int cmd_fit_macro(const ConfigArgs& args) {
  const PipelineConfig cfg = args.resolve();
  if (cfg.cloud.empty()) throw Error("fit-macro: --cloud is required");
  const auto path = cfg.archive_path();
  CoefficientArchive ar = CoefficientArchive::load(path);
  if (!ar.frame) throw Error("fit-macro: archive has no leaf frame; run build-frame first");

  const auto cloud = load_point_cloud(cfg.cloud);
  MacroFitParams mp;
  mp.rho = cfg.rho_macro;
  mp.capacity = cfg.capacity;
  mp.overlap = cfg.overlap;
  mp.alpha = cfg.alpha;
  ar.heightmap = fit_macro_heightmap(cloud, *ar.frame, mp);
  ar.save(path);
  std::cout << "height map: " << ar.heightmap->field.size() << " subdomains ("
            << ar.heightmap->dropped_points << " points dropped), saved to " << path
            << "\n";
  return 0;
}

int cmd_fit_micro(const ConfigArgs& args) {
  const PipelineConfig cfg = args.resolve();
  if (cfg.volume.empty()) throw Error("fit-micro: --volume is required");
  const VoxelVolume volume = load_volume(cfg.volume);
  const double f_surface =
      cfg.has_f_surface() ? cfg.f_surface : estimate_threshold(volume);
  std::cout << "f_surface = " << f_surface << "\n";

  MicroFitParams mp;
  mp.rho = cfg.rho_micro;
  mp.capacity = cfg.capacity;
  mp.overlap = cfg.overlap;
  mp.band = cfg.band;
  mp.stride = cfg.stride;

  const auto path = cfg.archive_path();
  CoefficientArchive ar;
  if (std::filesystem::exists(path)) ar = CoefficientArchive::load(path);
  ar.micro = fit_micro_implicit(volume, f_surface, mp);
  ar.config_text = cfg.to_text();
  if (!std::filesystem::is_directory(cfg.volume))
    ar.input_hashes["volume"] = hash_file(cfg.volume);
  ar.save(path);
  std::cout << "micro patch: " << ar.micro->field.size() << " subdomains, saved to "
            << path << "\n";
  return 0;
}

int cmd_tile(const ConfigArgs& args) {
  const PipelineConfig cfg = args.resolve();
  const auto path = cfg.archive_path();
  CoefficientArchive ar = CoefficientArchive::load(path);
  if (!ar.micro || !ar.heightmap)
    throw Error("tile: archive needs both the micro patch and the height map");
  ar.layout = build_tiling(*ar.micro, ar.heightmap->domain);
  ar.save(path);
  std::cout << "tiling: " << ar.layout->copy_count() << " copies, saved to " << path
            << "\n";
  return 0;
}

int cmd_extract_mesh(const ConfigArgs& args) {
  const PipelineConfig cfg = args.resolve();
  CoefficientArchive ar = CoefficientArchive::load(cfg.archive_path());
  const MultiScaleField field = ar.assemble();

  std::filesystem::create_directories(cfg.output_dir);
  const std::string ext = cfg.mesh_format == "obj" ? ".obj" : ".ply";
  const MeshFormat fmt = cfg.mesh_format == "obj" ? MeshFormat::Obj : MeshFormat::PlyBinary;

  const BoundingBox<2> window = central_tile_window(field);
  const auto& e = field.micro().extent;
  const TriangleMesh micro = extract_implicit_mesh(
      field, window, e.lo[2] - 2.0 * cfg.h_micro, e.hi[2] + 2.0 * cfg.h_micro,
      cfg.h_micro);
  const TriangleMesh macro = sample_heightmap_mesh(field.heightmap(), field.frame(),
                                                   cfg.h_macro);
  const auto micro_path = std::filesystem::path(cfg.output_dir) / ("micro_mesh" + ext);
  const auto macro_path = std::filesystem::path(cfg.output_dir) / ("macro_mesh" + ext);
  save_mesh(micro, micro_path, fmt);
  save_mesh(macro, macro_path, fmt);
  std::cout << "micro mesh: " << micro.vertices.size() << " vertices -> " << micro_path
            << "\nmacro mesh: " << macro.vertices.size() << " vertices -> " << macro_path
            << "\n";
  return 0;
}

int cmd_bench(std::vector<std::size_t> sizes, const ConfigArgs& args) {
  const PipelineConfig cfg = args.resolve();
  if (sizes.empty()) sizes = {25000, 100000};
  const auto runs =
      run_bench(sizes, cfg.capacity, cfg.overlap, cfg.rho_macro, cfg.seed, std::cout);
  if (runs.size() >= 2 && runs.front().seconds > 0.0) {
    std::cout << "time ratio (" << runs.back().n << " / " << runs.front().n
              << ") = " << runs.back().seconds / runs.front().seconds << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale leaf surface reconstruction"};
  app.require_subcommand(1);

  SynthParams synth_params;
  std::string synth_out = "fixture";
  auto* synth = app.add_subcommand("synth", "generate a synthetic leaf fixture");
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--length", synth_params.length, "blade length");
  synth->add_option("--width", synth_params.width, "blade width");
  synth->add_option("--bow", synth_params.bow, "medial-axis bow");
  synth->add_option("--twist", synth_params.twist_deg, "total twist in degrees");
  synth->add_option("--ridge-amplitude", synth_params.ridge_amplitude, "ridge amplitude");
  synth->add_option("--ridge-period", synth_params.ridge_period, "ridge period");
  synth->add_option("--hairs", synth_params.hair_count, "number of hairs on the tile");
  synth->add_option("--noise", synth_params.noise_sigma, "cloud noise sigma");
  synth->add_option("--cloud-count", synth_params.cloud_count, "cloud point count");
  synth->add_option("--patch", synth_params.patch_size, "micro tile width");
  synth->add_option("--voxel", synth_params.voxel, "voxel spacing");
  synth->add_option("--seed", synth_params.seed, "random seed");

  ConfigArgs reconstruct_args, frame_args, macro_args, micro_args, tile_args, mesh_args,
      bench_args;
  auto* reconstruct =
      app.add_subcommand("reconstruct", "run the full reconstruction pipeline");
  reconstruct_args.attach(reconstruct);
  auto* build_frame =
      app.add_subcommand("build-frame", "fit the leaf coordinate frame");
  frame_args.attach(build_frame);
  auto* fit_macro = app.add_subcommand("fit-macro", "fit the macro-scale height map");
  macro_args.attach(fit_macro);
  auto* fit_micro = app.add_subcommand("fit-micro", "fit the micro-scale implicit patch");
  micro_args.attach(fit_micro);
  auto* tile = app.add_subcommand("tile", "build the tiling layout");
  tile_args.attach(tile);
  auto* extract =
      app.add_subcommand("extract-mesh", "extract meshes from a coefficient archive");
  mesh_args.attach(extract);

  std::vector<std::size_t> bench_sizes;
  auto* bench = app.add_subcommand("bench", "time the interpolant fit at several sizes");
  bench->add_option("--sizes", bench_sizes, "point counts to benchmark");
  bench_args.attach(bench);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_params, synth_out);
    if (reconstruct->parsed()) {
      const PipelineConfig cfg = reconstruct_args.resolve();
      run_reconstruct(cfg, std::cout);
      return 0;
    }
    if (build_frame->parsed()) return cmd_build_frame(frame_args);
    if (fit_macro->parsed()) return cmd_fit_macro(macro_args);
    if (fit_micro->parsed()) return cmd_fit_micro(micro_args);
    if (tile->parsed()) return cmd_tile(tile_args);
    if (extract->parsed()) return cmd_extract_mesh(mesh_args);
    if (bench->parsed()) return cmd_bench(bench_sizes, bench_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
