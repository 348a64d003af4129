#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "leafsurf/common.hpp"
#include "leafsurf/mesh.hpp"
#include "leafsurf/reconstruction.hpp"

namespace leafsurf {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace io_detail {

inline std::string lower_ext(const std::filesystem::path& path) {
  std::string e = path.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return e;
}

inline void fail(const std::filesystem::path& path, const std::string& msg) {
  throw Error(path.string() + ": " + msg);
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Point clouds: whitespace-separated ASCII `x y z` (comments with #), or a
// PLY file containing vertices.
// ---------------------------------------------------------------------------

inline std::vector<Vec3> load_point_cloud_ply(const std::filesystem::path& path);

inline std::vector<Vec3> load_point_cloud(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) io_detail::fail(path, "file does not exist");
  if (io_detail::lower_ext(path) == ".ply") return load_point_cloud_ply(path);

  std::ifstream in(path);
  if (!in) io_detail::fail(path, "cannot open");
  std::vector<Vec3> points;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double x, y, z;
    if (ls >> x) {
      std::string extra;
      if (!(ls >> y >> z) || (ls >> extra))
        io_detail::fail(path, "malformed point on line " + std::to_string(lineno));
      points.emplace_back(x, y, z);
    } else {
      std::string tok;
      std::istringstream check(line);
      if (check >> tok)
        io_detail::fail(path, "malformed point on line " + std::to_string(lineno));
    }
  }
  return points;
}

inline void save_point_cloud(std::span<const Vec3> points,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) io_detail::fail(path, "cannot open for writing");
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
}

inline std::vector<Vec3> load_point_cloud_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_detail::fail(path, "cannot open");
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply")
    io_detail::fail(path, "not a PLY file");

  bool binary = false;
  std::size_t vertex_count = 0;
  struct Prop {
    std::string name;
    int bytes;  // for binary skip
    bool is_double;
  };
  std::vector<Prop> props;
  bool in_vertex_element = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt != "ascii") io_detail::fail(path, "unsupported PLY format " + fmt);
    } else if (word == "element") {
      std::string name;
      std::size_t count;
      ls >> name >> count;
      in_vertex_element = (name == "vertex");
      if (in_vertex_element) vertex_count = count;
      else if (count > 0 && !props.empty())
        break;  // only vertices are read; later elements are ignored
    } else if (word == "property" && in_vertex_element) {
      std::string type, name;
      ls >> type >> name;
      int bytes = 4;
      if (type == "double" || type == "float64") bytes = 8;
      else if (type == "float" || type == "float32") bytes = 4;
      else if (type == "uchar" || type == "uint8" || type == "char" || type == "int8") bytes = 1;
      else if (type == "short" || type == "ushort") bytes = 2;
      props.push_back({name, bytes, bytes == 8});
    } else if (word == "end_header") {
      break;
    }
  }

  int ix = -1, iy = -1, iz = -1;
  for (int i = 0; i < static_cast<int>(props.size()); ++i) {
    if (props[i].name == "x") ix = i;
    if (props[i].name == "y") iy = i;
    if (props[i].name == "z") iz = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) io_detail::fail(path, "PLY has no x/y/z properties");

  std::vector<Vec3> points;
  points.reserve(vertex_count);
  if (binary) {
    for (std::size_t v = 0; v < vertex_count; ++v) {
      Vec3 p = Vec3::Zero();
      for (int i = 0; i < static_cast<int>(props.size()); ++i) {
        char buf[8];
        in.read(buf, props[i].bytes);
        if (!in) io_detail::fail(path, "truncated PLY vertex data");
        double val = 0.0;
        if (props[i].bytes == 8) {
          std::memcpy(&val, buf, 8);
        } else if (props[i].bytes == 4) {
          float f;
          std::memcpy(&f, buf, 4);
          val = f;
        }
        if (i == ix) p.x() = val;
        if (i == iy) p.y() = val;
        if (i == iz) p.z() = val;
      }
      points.push_back(p);
    }
  } else {
    for (std::size_t v = 0; v < vertex_count; ++v) {
      std::vector<double> vals(props.size());
      for (auto& val : vals)
        if (!(in >> val)) io_detail::fail(path, "truncated PLY vertex data");
      points.emplace_back(vals[ix], vals[iy], vals[iz]);
    }
  }
  return points;
}

// ---------------------------------------------------------------------------
// Voxel volumes: a directory of binary PGM slices plus a `meta.txt` sidecar,
// or a raw little-endian float32 file plus a `<file>.meta` sidecar.
// ---------------------------------------------------------------------------

namespace io_detail {

inline std::map<std::string, std::vector<double>> read_sidecar(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "missing sidecar file");
  std::map<std::string, std::vector<double>> keys;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    keys[key] = vals;
  }
  return keys;
}

inline std::vector<double> sidecar_get(
    const std::map<std::string, std::vector<double>>& keys, const std::string& name,
    std::size_t count, const std::filesystem::path& path) {
  auto it = keys.find(name);
  if (it == keys.end() || it->second.size() != count)
    fail(path, "sidecar missing key `" + name + "` with " + std::to_string(count) +
                   " values");
  return it->second;
}

inline int pgm_token(std::istream& in, const std::filesystem::path& path) {
  // Skips whitespace and `#` comments between header tokens.
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value;
  if (!(in >> value)) fail(path, "malformed PGM header");
  return value;
}

}  // namespace io_detail

inline VoxelVolume load_volume(const std::filesystem::path& path) {
  VoxelVolume vol;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> slices;
    for (const auto& entry : std::filesystem::directory_iterator(path))
      if (io_detail::lower_ext(entry.path()) == ".pgm") slices.push_back(entry.path());
    std::sort(slices.begin(), slices.end());
    if (slices.empty()) io_detail::fail(path, "no .pgm slices in directory");

    const auto meta = io_detail::read_sidecar(path / "meta.txt");
    const auto spacing = io_detail::sidecar_get(meta, "spacing", 3, path / "meta.txt");
    const auto origin = io_detail::sidecar_get(meta, "origin", 3, path / "meta.txt");
    vol.spacing = Vec3(spacing[0], spacing[1], spacing[2]);
    vol.origin = Vec3(origin[0], origin[1], origin[2]);
    vol.dims[2] = static_cast<int>(slices.size());

    for (std::size_t k = 0; k < slices.size(); ++k) {
      std::ifstream in(slices[k], std::ios::binary);
      if (!in) io_detail::fail(slices[k], "cannot open");
      std::string magic;
      in >> magic;
      if (magic != "P5") io_detail::fail(slices[k], "expected binary PGM (P5)");
      const int w = io_detail::pgm_token(in, slices[k]);
      const int h = io_detail::pgm_token(in, slices[k]);
      const int maxval = io_detail::pgm_token(in, slices[k]);
      in.get();  // single whitespace after maxval
      if (k == 0) {
        vol.dims[0] = w;
        vol.dims[1] = h;
        vol.intensities.resize(static_cast<std::size_t>(w) * h * slices.size());
      } else if (w != vol.dims[0] || h != vol.dims[1]) {
        io_detail::fail(slices[k], "slice dimensions differ from the first slice");
      }
      const std::size_t n = static_cast<std::size_t>(w) * h;
      const int bytes = maxval > 255 ? 2 : 1;
      std::vector<unsigned char> raw(n * bytes);
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (!in) io_detail::fail(slices[k], "truncated PGM pixel data");
      for (std::size_t i = 0; i < n; ++i) {
        const unsigned value = bytes == 2
                                   ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1]
                                   : raw[i];
        vol.intensities[k * n + i] =
            static_cast<float>(static_cast<double>(value) / maxval);
      }
    }
    return vol;
  }

  // Raw little-endian float32 array with sidecar.
  const std::filesystem::path meta_path = path.string() + ".meta";
  const auto meta = io_detail::read_sidecar(meta_path);
  const auto dims = io_detail::sidecar_get(meta, "dims", 3, meta_path);
  const auto spacing = io_detail::sidecar_get(meta, "spacing", 3, meta_path);
  const auto origin = io_detail::sidecar_get(meta, "origin", 3, meta_path);
  vol.dims = {static_cast<int>(dims[0]), static_cast<int>(dims[1]),
              static_cast<int>(dims[2])};
  vol.spacing = Vec3(spacing[0], spacing[1], spacing[2]);
  vol.origin = Vec3(origin[0], origin[1], origin[2]);

  std::ifstream in(path, std::ios::binary);
  if (!in) io_detail::fail(path, "cannot open");
  const std::size_t n = static_cast<std::size_t>(vol.dims[0]) * vol.dims[1] * vol.dims[2];
  vol.intensities.resize(n);
  in.read(reinterpret_cast<char*>(vol.intensities.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) io_detail::fail(path, "truncated raw volume data");

  double lo, hi;
  if (meta.count("range")) {
    const auto range = io_detail::sidecar_get(meta, "range", 2, meta_path);
    lo = range[0];
    hi = range[1];
  } else {
    lo = *std::min_element(vol.intensities.begin(), vol.intensities.end());
    hi = *std::max_element(vol.intensities.begin(), vol.intensities.end());
  }
  if (hi > lo && !(lo == 0.0 && hi == 1.0)) {
    for (auto& v : vol.intensities)
      v = static_cast<float>((v - lo) / (hi - lo));
  }
  return vol;
}

inline void save_volume_raw(const VoxelVolume& vol, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) io_detail::fail(path, "cannot open for writing");
  out.write(reinterpret_cast<const char*>(vol.intensities.data()),
            static_cast<std::streamsize>(vol.intensities.size() * sizeof(float)));
  std::ofstream meta(path.string() + ".meta");
  char buf[256];
  std::snprintf(buf, sizeof(buf), "dims %d %d %d\nspacing %.17g %.17g %.17g\norigin %.17g %.17g %.17g\nrange 0 1\n",
                vol.dims[0], vol.dims[1], vol.dims[2], vol.spacing[0], vol.spacing[1],
                vol.spacing[2], vol.origin[0], vol.origin[1], vol.origin[2]);
  meta << buf;
}

// ---------------------------------------------------------------------------
// Triangle meshes: Wavefront OBJ (text) or binary little-endian PLY.
// ---------------------------------------------------------------------------

enum class MeshFormat { Obj, PlyBinary };

inline void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path,
                      MeshFormat format) {
  if (format == MeshFormat::Obj) {
    std::ofstream out(path);
    if (!out) io_detail::fail(path, "cannot open for writing");
    char buf[160];
    for (const auto& v : mesh.vertices) {
      std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
      out << buf;
    }
    for (const auto& t : mesh.triangles) {
      std::snprintf(buf, sizeof(buf), "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
      out << buf;
    }
    return;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) io_detail::fail(path, "cannot open for writing");
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar uint vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices) {
    const double xyz[3] = {v.x(), v.y(), v.z()};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (const auto& t : mesh.triangles) {
    const unsigned char n = 3;
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(t.data()), 3 * sizeof(std::uint32_t));
  }
}

inline TriangleMesh load_mesh(const std::filesystem::path& path) {
  TriangleMesh mesh;
  if (io_detail::lower_ext(path) == ".obj") {
    std::ifstream in(path);
    if (!in) io_detail::fail(path, "cannot open");
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string tag;
      if (!(ls >> tag)) continue;
      if (tag == "v") {
        Vec3 v;
        ls >> v.x() >> v.y() >> v.z();
        mesh.vertices.push_back(v);
      } else if (tag == "f") {
        std::array<std::uint32_t, 3> t;
        ls >> t[0] >> t[1] >> t[2];
        mesh.triangles.push_back({t[0] - 1, t[1] - 1, t[2] - 1});
      }
    }
    return mesh;
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) io_detail::fail(path, "cannot open");
  std::string line;
  std::getline(in, line);
  if (line.substr(0, 3) != "ply") io_detail::fail(path, "not a PLY mesh");
  std::size_t nverts = 0, nfaces = 0;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream ls(line);
    std::string word, name;
    std::size_t count;
    ls >> word;
    if (word == "element") {
      ls >> name >> count;
      if (name == "vertex") nverts = count;
      if (name == "face") nfaces = count;
    }
  }
  mesh.vertices.resize(nverts);
  for (auto& v : mesh.vertices) {
    double xyz[3];
    in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
    v = Vec3(xyz[0], xyz[1], xyz[2]);
  }
  mesh.triangles.resize(nfaces);
  for (auto& t : mesh.triangles) {
    unsigned char n;
    in.read(reinterpret_cast<char*>(&n), 1);
    if (n != 3) io_detail::fail(path, "non-triangular face in PLY");
    in.read(reinterpret_cast<char*>(t.data()), 3 * sizeof(std::uint32_t));
  }
  if (!in) io_detail::fail(path, "truncated PLY mesh");
  return mesh;
}

/// FNV-1a hash of a file's bytes; recorded in archive provenance.
inline std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_detail::fail(path, "cannot open for hashing");
  std::uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  return h;
}

}  // namespace leafsurf
