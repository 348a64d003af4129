#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "leafsurf/common.hpp"
#include "leafsurf/multiscale.hpp"
#include "leafsurf/reconstruction.hpp"

namespace leafsurf {

namespace archive_detail {

constexpr char kMagic[8] = {'L', 'E', 'A', 'F', 'S', 'R', 'F', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error(path.string() + ": cannot open archive for writing");
  }

  void raw(const void* data, std::size_t bytes) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void i64(std::int64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  template <int D>
  void vec(const Vec<D>& v) {
    for (int k = 0; k < D; ++k) f64(v[k]);
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
  }
  void eigvec(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    raw(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
  }
  bool good() const { return static_cast<bool>(out_); }

private:
  std::ofstream out_;
};

class Reader {
public:
  explicit Reader(const std::filesystem::path& path)
      : path_(path.string()), in_(path, std::ios::binary) {
    if (!in_) throw Error(path_ + ": cannot open archive");
  }

  void raw(void* data, std::size_t bytes) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (!in_) throw Error(path_ + ": truncated archive");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  std::int64_t i64() {
    std::int64_t v;
    raw(&v, 8);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    std::string s(checked_count(u64(), 1), '\0');
    raw(s.data(), s.size());
    return s;
  }
  template <int D>
  Vec<D> vec() {
    Vec<D> v;
    for (int k = 0; k < D; ++k) v[k] = f64();
    return v;
  }
  std::vector<double> doubles() {
    std::vector<double> v(checked_count(u64(), sizeof(double)));
    raw(v.data(), v.size() * sizeof(double));
    return v;
  }
  Eigen::VectorXd eigvec() {
    Eigen::VectorXd v(static_cast<Eigen::Index>(checked_count(u64(), sizeof(double))));
    raw(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
    return v;
  }

private:
  std::size_t checked_count(std::uint64_t n, std::size_t elem_bytes) {
    // Reject counts that cannot possibly fit in the file.
    if (n > (std::uint64_t(1) << 40) / std::max<std::size_t>(elem_bytes, 1))
      throw Error(path_ + ": corrupt archive (implausible element count)");
    return static_cast<std::size_t>(n);
  }

  std::string path_;
  std::ifstream in_;
};

inline void write_spline(Writer& w, const CubicSpline3& s) {
  w.u64(s.size());
  for (double k : s.knots()) w.f64(k);
  for (const auto& v : s.control_points()) w.vec<3>(v);
  for (const auto& v : s.second_derivatives()) w.vec<3>(v);
}

inline CubicSpline3 read_spline(Reader& r) {
  const std::size_t K = static_cast<std::size_t>(r.u64());
  std::vector<double> knots(K);
  std::vector<Vec3> values(K), second(K);
  for (auto& k : knots) k = r.f64();
  for (auto& v : values) v = r.vec<3>();
  for (auto& v : second) v = r.vec<3>();
  return CubicSpline3::from_coefficients(std::move(knots), std::move(values),
                                         std::move(second));
}

template <int D>
inline void write_pu(Writer& w, const PUField<D>& field) {
  w.u64(field.size());
  for (const auto& sub : field.subdomains()) {
    w.vec<D>(sub.center);
    w.f64(sub.radius);
    w.u64(sub.local.centers.size());
    for (const auto& c : sub.local.centers) w.vec<D>(c);
    w.eigvec(sub.local.lambda);
    w.eigvec(sub.local.a);
    w.f64(sub.local.rho);
    w.f64(sub.local.kkt_residual);
  }
}

template <int D>
inline PUField<D> read_pu(Reader& r) {
  const std::size_t M = static_cast<std::size_t>(r.u64());
  std::vector<Subdomain<D>> subs(M);
  for (auto& sub : subs) {
    sub.center = r.vec<D>();
    sub.radius = r.f64();
    const std::size_t N = static_cast<std::size_t>(r.u64());
    sub.local.centers.resize(N);
    for (auto& c : sub.local.centers) c = r.vec<D>();
    sub.local.lambda = r.eigvec();
    sub.local.a = r.eigvec();
    sub.local.rho = r.f64();
    sub.local.kkt_residual = r.f64();
    if (sub.local.lambda.size() != static_cast<Eigen::Index>(N) ||
        sub.local.a.size() != D + 1)
      throw Error("archive: inconsistent interpolant coefficient sizes");
  }
  return PUField<D>(std::move(subs));
}

}  // namespace archive_detail

/// Serialized reconstruction state: leaf frame, macro height map, micro
/// patch, and tiling layout, plus provenance (the configuration text and
/// hashes of the input files). Sections are optional so that pipeline
/// stages can be run and stored one at a time. Coefficients are stored as
/// raw little-endian doubles; a saved field evaluates bit-identically
/// after loading.
struct CoefficientArchive {
  std::optional<LeafFrame> frame;
  std::optional<HeightMap> heightmap;
  std::optional<MicroPatch> micro;
  std::optional<TilingLayout> layout;
  std::string config_text;
  std::map<std::string, std::uint64_t> input_hashes;

  bool complete() const { return frame && heightmap && micro && layout; }

  MultiScaleField assemble() const {
    if (!complete())
      throw Error("CoefficientArchive: cannot assemble, missing sections");
    return MultiScaleField(*frame, *heightmap, *micro, *layout);
  }

  static CoefficientArchive from_field(const MultiScaleField& field,
                                       std::string config_text = {},
                                       std::map<std::string, std::uint64_t> hashes = {}) {
    CoefficientArchive ar;
    ar.frame = field.frame();
    ar.heightmap = field.heightmap();
    ar.micro = field.micro();
    ar.layout = field.layout();
    ar.config_text = std::move(config_text);
    ar.input_hashes = std::move(hashes);
    return ar;
  }

  void save(const std::filesystem::path& path) const {
    using namespace archive_detail;
    Writer w(path);
    w.raw(kMagic, sizeof(kMagic));
    w.u32(kVersion);
    std::uint8_t flags = 0;
    if (frame) flags |= 1;
    if (heightmap) flags |= 2;
    if (micro) flags |= 4;
    if (layout) flags |= 8;
    w.u8(flags);

    w.str(config_text);
    w.u64(input_hashes.size());
    for (const auto& [name, hash] : input_hashes) {
      w.str(name);
      w.u64(hash);
    }

    if (frame) {
      write_spline(w, frame->medial());
      write_spline(w, frame->normal_raw());
      w.f64(frame->normal_radius());
    }
    if (heightmap) {
      write_pu<2>(w, heightmap->field);
      w.vec<2>(heightmap->domain.lo);
      w.vec<2>(heightmap->domain.hi);
      w.u64(heightmap->shape.points().size());
      for (const auto& p : heightmap->shape.points()) w.vec<2>(p);
      w.u64(heightmap->shape.triangles().size());
      for (const auto& t : heightmap->shape.triangles())
        for (int v : t) w.i64(v);
      w.f64(heightmap->shape.alpha());
      w.u64(heightmap->dropped_points);
    }
    if (micro) {
      write_pu<3>(w, micro->field);
      w.vec<3>(micro->extent.lo);
      w.vec<3>(micro->extent.hi);
      w.f64(micro->f_surface);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) w.f64(micro->alignment.rotation(i, j));
      w.vec<3>(micro->alignment.translation);
    }
    if (layout) {
      w.vec<2>(layout->tile_extent);
      w.i64(layout->q1_min);
      w.i64(layout->q1_max);
      w.i64(layout->q2_min);
      w.i64(layout->q2_max);
      w.vec<2>(layout->covered.lo);
      w.vec<2>(layout->covered.hi);
    }
    if (!w.good()) throw Error(path.string() + ": archive write failed");
  }

  static CoefficientArchive load(const std::filesystem::path& path) {
    using namespace archive_detail;
    Reader r(path);
    char magic[8];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(magic)) != 0)
      throw Error(path.string() + ": not a coefficient archive");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
      throw Error(path.string() + ": unsupported archive version " +
                  std::to_string(version));
    const std::uint8_t flags = r.u8();

    CoefficientArchive ar;
    ar.config_text = r.str();
    const std::uint64_t nhashes = r.u64();
    for (std::uint64_t i = 0; i < nhashes; ++i) {
      std::string name = r.str();
      ar.input_hashes[name] = r.u64();
    }

    if (flags & 1) {
      CubicSpline3 medial = read_spline(r);
      CubicSpline3 normal = read_spline(r);
      const double R = r.f64();
      ar.frame = LeafFrame(std::move(medial), std::move(normal), R);
    }
    if (flags & 2) {
      HeightMap hm;
      hm.field = read_pu<2>(r);
      hm.domain.lo = r.vec<2>();
      hm.domain.hi = r.vec<2>();
      Triangulation2D tri;
      tri.points.resize(static_cast<std::size_t>(r.u64()));
      for (auto& p : tri.points) p = r.vec<2>();
      tri.triangles.resize(static_cast<std::size_t>(r.u64()));
      for (auto& t : tri.triangles)
        for (int& v : t) v = static_cast<int>(r.i64());
      const double alpha = r.f64();
      hm.shape = AlphaShape2D(tri, alpha);
      hm.dropped_points = static_cast<std::size_t>(r.u64());
      ar.heightmap = std::move(hm);
    }
    if (flags & 4) {
      MicroPatch mp;
      mp.field = read_pu<3>(r);
      mp.extent.lo = r.vec<3>();
      mp.extent.hi = r.vec<3>();
      mp.f_surface = r.f64();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) mp.alignment.rotation(i, j) = r.f64();
      mp.alignment.translation = r.vec<3>();
      ar.micro = std::move(mp);
    }
    if (flags & 8) {
      TilingLayout lay;
      lay.tile_extent = r.vec<2>();
      lay.q1_min = static_cast<int>(r.i64());
      lay.q1_max = static_cast<int>(r.i64());
      lay.q2_min = static_cast<int>(r.i64());
      lay.q2_max = static_cast<int>(r.i64());
      lay.covered.lo = r.vec<2>();
      lay.covered.hi = r.vec<2>();
      ar.layout = lay;
    }
    return ar;
  }
};

}  // namespace leafsurf
