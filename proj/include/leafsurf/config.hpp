#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "leafsurf/common.hpp"

namespace leafsurf {

/// Run configuration for the reconstruction pipeline. Defaults follow the
/// reference setup; every key can come from a `key = value` file or a
/// command-line override, with unknown keys rejected.
struct PipelineConfig {
  std::string cloud;           // macro point cloud path
  std::string control_points;  // medial-axis control point path
  std::string volume;          // micro-CT volume path (raw file or PGM directory)
  std::string output_dir = ".";
  std::string archive = "";    // defaults to <output_dir>/coefficients.lsrf
  std::string mesh_format = "obj";  // obj | ply

  double rho_macro = 1e-6;
  double rho_micro = 1e-7;
  std::size_t capacity = 400;
  double overlap = 1.25;

  double f_surface = std::numeric_limits<double>::quiet_NaN();  // NaN = estimate
  double band = 0.1;
  std::ptrdiff_t stride = 8;

  double normal_radius = 5.0;  // PCA radius R for frame normals
  double alpha = 0.0;          // alpha-shape radius, <= 0 selects automatically
  double h_micro = 0.006;      // implicit meshing lattice spacing
  double h_macro = 0.25;       // height map sampling spacing

  int threads = 0;  // 0 = library default
  std::uint64_t seed = 1;

  static const std::map<std::string, std::string>& key_help() {
    static const std::map<std::string, std::string> help = {
        {"cloud", "macro point cloud file (ascii xyz or ply)"},
        {"control_points", "ordered medial-axis control points (ascii xyz)"},
        {"volume", "micro volume (raw float file or directory of pgm slices)"},
        {"output_dir", "directory for meshes and the coefficient archive"},
        {"archive", "coefficient archive path"},
        {"mesh_format", "mesh output format: obj or ply"},
        {"rho_macro", "smoothing parameter for the macro height map"},
        {"rho_micro", "smoothing parameter for the micro implicit field"},
        {"capacity", "octree leaf capacity"},
        {"overlap", "subdomain overlap factor (> 1)"},
        {"f_surface", "surface iso-threshold; omit to estimate from the histogram"},
        {"band", "intensity band kept at full resolution around f_surface"},
        {"stride", "keep every stride-th off-band voxel (<= 0 disables)"},
        {"normal_radius", "pca neighbourhood radius for frame normals"},
        {"alpha", "alpha-shape radius (<= 0 selects 3x median spacing)"},
        {"h_micro", "implicit meshing lattice spacing"},
        {"h_macro", "height map sampling spacing"},
        {"threads", "worker thread count (0 = default)"},
        {"seed", "random seed for synthetic data"},
    };
    return help;
  }

  void set(const std::string& key, const std::string& value) {
    auto as_double = [&] {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(value, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != value.size())
        throw Error("config: key `" + key + "` expects a number, got `" + value + "`");
      return v;
    };
    auto as_int = [&] {
      const double v = as_double();
      if (v != std::floor(v))
        throw Error("config: key `" + key + "` expects an integer, got `" + value + "`");
      return static_cast<long long>(v);
    };

    if (key == "cloud") cloud = value;
    else if (key == "control_points") control_points = value;
    else if (key == "volume") volume = value;
    else if (key == "output_dir") output_dir = value;
    else if (key == "archive") archive = value;
    else if (key == "mesh_format") mesh_format = value;
    else if (key == "rho_macro") rho_macro = as_double();
    else if (key == "rho_micro") rho_micro = as_double();
    else if (key == "capacity") capacity = static_cast<std::size_t>(as_int());
    else if (key == "overlap") overlap = as_double();
    else if (key == "f_surface") f_surface = as_double();
    else if (key == "band") band = as_double();
    else if (key == "stride") stride = static_cast<std::ptrdiff_t>(as_int());
    else if (key == "normal_radius") normal_radius = as_double();
    else if (key == "alpha") alpha = as_double();
    else if (key == "h_micro") h_micro = as_double();
    else if (key == "h_macro") h_macro = as_double();
    else if (key == "threads") threads = static_cast<int>(as_int());
    else if (key == "seed") seed = static_cast<std::uint64_t>(as_int());
    else throw Error("config: unknown key `" + key + "`");
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(path.string() + ": cannot open config file");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        std::istringstream check(line);
        std::string tok;
        if (check >> tok)
          throw Error(path.string() + ":" + std::to_string(lineno) +
                      ": expected `key = value`");
        continue;
      }
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      try {
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const Error& e) {
        throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void validate() const {
    if (!(rho_macro >= 0.0) || !(rho_micro >= 0.0))
      throw Error("config: smoothing parameters must be nonnegative");
    if (capacity < 8) throw Error("config: capacity must be at least 8");
    if (!(overlap > 1.0)) throw Error("config: overlap must exceed 1");
    if (!(band > 0.0)) throw Error("config: band must be positive");
    if (!(normal_radius > 0.0)) throw Error("config: normal_radius must be positive");
    if (!(h_micro > 0.0) || !(h_macro > 0.0))
      throw Error("config: mesh spacings must be positive");
    if (mesh_format != "obj" && mesh_format != "ply")
      throw Error("config: mesh_format must be obj or ply");
    if (threads < 0) throw Error("config: threads must be nonnegative");
  }

  bool has_f_surface() const { return !std::isnan(f_surface); }

  std::string archive_path() const {
    if (!archive.empty()) return archive;
    return (std::filesystem::path(output_dir) / "coefficients.lsrf").string();
  }

  /// Canonical text form, recorded in the archive provenance section.
  std::string to_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "cloud = " << cloud << "\n"
        << "control_points = " << control_points << "\n"
        << "volume = " << volume << "\n"
        << "output_dir = " << output_dir << "\n"
        << "archive = " << archive << "\n"
        << "mesh_format = " << mesh_format << "\n"
        << "rho_macro = " << rho_macro << "\n"
        << "rho_micro = " << rho_micro << "\n"
        << "capacity = " << capacity << "\n"
        << "overlap = " << overlap << "\n"
        << "f_surface = " << f_surface << "\n"
        << "band = " << band << "\n"
        << "stride = " << stride << "\n"
        << "normal_radius = " << normal_radius << "\n"
        << "alpha = " << alpha << "\n"
        << "h_micro = " << h_micro << "\n"
        << "h_macro = " << h_macro << "\n"
        << "threads = " << threads << "\n"
        << "seed = " << seed << "\n";
    return out.str();
  }
};

}  // namespace leafsurf
