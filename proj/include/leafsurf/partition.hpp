#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <omp.h>

#include "leafsurf/common.hpp"
#include "leafsurf/rbf.hpp"

namespace leafsurf {

/// Compactly supported Wendland weight: (1-tau)^4 (4 tau + 1) on [0,1],
/// zero beyond. C2 at tau = 1.
inline double wendland(double tau) {
  if (tau < 0.0) throw Error("wendland: negative argument");
  if (tau >= 1.0) return 0.0;
  const double u = 1.0 - tau;
  const double u2 = u * u;
  return u2 * u2 * (4.0 * tau + 1.0);
}

template <int D>
struct SubdomainGeometry {
  Vec<D> center;
  double radius = 0.0;
  std::vector<std::size_t> members;  // indices of points inside the sphere
};

namespace detail {

template <int D>
struct OctreeNode {
  BoundingBox<D> box;
  std::vector<std::size_t> indices;       // leaf payload
  std::vector<OctreeNode<D>> children;    // empty for leaves

  bool leaf() const { return children.empty(); }
};

template <int D>
inline void subdivide(OctreeNode<D>& node, std::span<const Vec<D>> points,
                      std::size_t capacity, int depth) {
  if (node.indices.size() <= capacity || depth >= 24) return;
  const Vec<D> c = node.box.center();
  node.children.resize(std::size_t(1) << D);
  for (std::size_t child = 0; child < node.children.size(); ++child) {
    BoundingBox<D>& b = node.children[child].box;
    for (int k = 0; k < D; ++k) {
      const bool hi = (child >> k) & 1;
      b.lo[k] = hi ? c[k] : node.box.lo[k];
      b.hi[k] = hi ? node.box.hi[k] : c[k];
    }
  }
  for (std::size_t idx : node.indices) {
    std::size_t child = 0;
    for (int k = 0; k < D; ++k)
      if (points[idx][k] > c[k]) child |= std::size_t(1) << k;
    node.children[child].indices.push_back(idx);
  }
  node.indices.clear();
  node.indices.shrink_to_fit();
  for (auto& ch : node.children) subdivide(ch, points, capacity, depth + 1);
}

template <int D>
inline bool sphere_overlaps_box(const Vec<D>& c, double r, const BoundingBox<D>& box) {
  double d2 = 0.0;
  for (int k = 0; k < D; ++k) {
    const double v = std::max({box.lo[k] - c[k], 0.0, c[k] - box.hi[k]});
    d2 += v * v;
  }
  return d2 <= r * r;
}

template <int D>
inline void radius_query(const OctreeNode<D>& node, std::span<const Vec<D>> points,
                         const Vec<D>& c, double r, std::vector<std::size_t>& out) {
  if (!sphere_overlaps_box(c, r, node.box)) return;
  if (node.leaf()) {
    const double r2 = r * r;
    for (std::size_t idx : node.indices)
      if ((points[idx] - c).squaredNorm() <= r2) out.push_back(idx);
    return;
  }
  for (const auto& ch : node.children) radius_query(ch, points, c, r, out);
}

template <int D>
inline void collect_leaves(const OctreeNode<D>& node,
                           std::vector<const OctreeNode<D>*>& out) {
  if (node.leaf()) {
    if (!node.indices.empty()) out.push_back(&node);
    return;
  }
  for (const auto& ch : node.children) collect_leaves(ch, out);
}

}  // namespace detail

/// Octree (quadtree in 2-D) subdomain construction: the bounding cube is
/// subdivided until each leaf holds at most `capacity` points; every
/// nonempty leaf yields a spherical subdomain centred on the leaf box with
/// radius = overlap * half box diagonal. Member sets are grown (radius
/// * 1.2 per step) until they hold at least d+2 points.
///
/// The root is the bounding box expanded to a cube about its centre, so
/// leaves stay isotropic on elongated domains; otherwise their diagonals
/// (and with them every subdomain radius) inherit the domain aspect ratio.
template <int D>
inline std::vector<SubdomainGeometry<D>> build_subdomains(
    std::span<const Vec<D>> points, std::size_t capacity, double overlap) {
  if (points.empty()) throw Error("build_subdomains: empty point set");
  if (capacity < 2 * (D + 1))
    throw Error("build_subdomains: capacity must be at least 2(d+1)");
  if (!(overlap > 1.0)) throw Error("build_subdomains: overlap must exceed 1");

  detail::OctreeNode<D> root;
  const BoundingBox<D> tight = bounding_box<D>(points);
  if (!(tight.diagonal() > 0.0))
    throw Error("build_subdomains: all points identical");
  const Vec<D> mid = tight.center();
  double half = 0.0;
  for (int k = 0; k < D; ++k) half = std::max(half, 0.5 * tight.extent()[k]);
  for (int k = 0; k < D; ++k) {
    root.box.lo[k] = mid[k] - half;
    root.box.hi[k] = mid[k] + half;
  }
  root.indices.resize(points.size());
  std::iota(root.indices.begin(), root.indices.end(), std::size_t(0));
  detail::subdivide(root, points, capacity, 0);

  std::vector<const detail::OctreeNode<D>*> leaves;
  detail::collect_leaves(root, leaves);

  std::vector<SubdomainGeometry<D>> subs;
  subs.reserve(leaves.size());
  for (const auto* leaf : leaves) {
    SubdomainGeometry<D> s;
    s.center = leaf->box.center();
    s.radius = overlap * 0.5 * leaf->box.diagonal();
    for (int grow = 0; grow < 200; ++grow) {
      s.members.clear();
      detail::radius_query(root, points, s.center, s.radius, s.members);
      if (s.members.size() >= D + 2) break;
      s.radius *= 1.2;
    }
    if (s.members.size() < D + 2)
      throw Error("build_subdomains: could not gather d+2 members for a subdomain");
    std::sort(s.members.begin(), s.members.end());
    subs.push_back(std::move(s));
  }
  return subs;
}

template <int D>
struct Subdomain {
  Vec<D> center;
  double radius = 0.0;
  LocalRBF<D> local;
};

/// A set of spherical subdomains with local interpolants, evaluable as one
/// blended scalar field via Wendland weights and Sheppard normalization.
/// Immutable after construction; safe to evaluate concurrently.
template <int D>
class PUField {
public:
  PUField() = default;

  explicit PUField(std::vector<Subdomain<D>> subdomains)
      : subdomains_(std::move(subdomains)) {
    if (subdomains_.empty()) throw Error("PUField: no subdomains");
    build_index();
  }

  struct Active {
    std::size_t index;
    double tau;  // normalized distance to the subdomain centre, < 1
  };

  /// Subdomains whose support contains x (tau < 1).
  std::vector<Active> active(const Vec<D>& x) const {
    std::vector<Active> out;
    auto consider = [&](std::size_t i) {
      const double tau = (x - subdomains_[i].center).norm() / subdomains_[i].radius;
      if (tau < 1.0) out.push_back({i, tau});
    };
    if (cells_.empty()) {
      for (std::size_t i = 0; i < subdomains_.size(); ++i) consider(i);
    } else {
      const auto cell = cell_of(x);
      if (cell >= 0) {
        for (std::size_t i : cells_[static_cast<std::size_t>(cell)]) consider(i);
      }
    }
    return out;
  }

  /// Sheppard-normalized weights over the active subdomains at x.
  std::vector<std::pair<std::size_t, double>> normalized_weights(const Vec<D>& x) const {
    const auto act = active(x);
    if (act.empty())
      throw OutsideDomainError("eval_pu: point outside all subdomains");
    double wsum = 0.0;
    std::vector<std::pair<std::size_t, double>> out;
    out.reserve(act.size());
    for (const auto& a : act) {
      const double w = wendland(a.tau);
      wsum += w;
      out.emplace_back(a.index, w);
    }
    if (wsum <= 0.0)
      throw OutsideDomainError("eval_pu: point on the boundary of all subdomains");
    for (auto& [i, w] : out) w /= wsum;
    return out;
  }

  double eval(const Vec<D>& x) const {
    double value = 0.0;
    for (const auto& [i, w] : normalized_weights(x))
      value += w * subdomains_[i].local.eval(x);
    return value;
  }

  const std::vector<Subdomain<D>>& subdomains() const { return subdomains_; }
  std::size_t size() const { return subdomains_.size(); }
  const Subdomain<D>& operator[](std::size_t i) const { return subdomains_[i]; }

private:
  void build_index() {
    const std::size_t M = subdomains_.size();
    if (M < 64) return;  // exhaustive scan is fine below this

    double rsum = 0.0;
    for (const auto& s : subdomains_) {
      for (int k = 0; k < D; ++k) {
        box_.lo[k] = std::min(box_.lo[k], s.center[k] - s.radius);
        box_.hi[k] = std::max(box_.hi[k], s.center[k] + s.radius);
      }
      rsum += s.radius;
    }
    cell_size_ = rsum / static_cast<double>(M);
    std::size_t total = 1;
    for (int k = 0; k < D; ++k) {
      dims_[k] = std::max<std::ptrdiff_t>(
          1, static_cast<std::ptrdiff_t>(std::ceil(box_.extent()[k] / cell_size_)));
      total *= static_cast<std::size_t>(dims_[k]);
      if (total > (std::size_t(1) << 24)) {  // cap the grid memory
        cell_size_ *= 2.0;
        k = -1;
        total = 1;
      }
    }
    cells_.assign(total, {});
    for (std::size_t i = 0; i < M; ++i) {
      const auto& s = subdomains_[i];
      std::ptrdiff_t lo[D], hi[D];
      for (int k = 0; k < D; ++k) {
        lo[k] = clamp_axis((s.center[k] - s.radius - box_.lo[k]) / cell_size_, k);
        hi[k] = clamp_axis((s.center[k] + s.radius - box_.lo[k]) / cell_size_, k);
      }
      // iterate the covered cell block
      std::ptrdiff_t it[D];
      for (int k = 0; k < D; ++k) it[k] = lo[k];
      bool done = false;
      while (!done) {
        std::size_t lin = 0;
        for (int k = D - 1; k >= 0; --k)
          lin = lin * static_cast<std::size_t>(dims_[k]) + static_cast<std::size_t>(it[k]);
        cells_[lin].push_back(i);
        int k = 0;
        for (; k < D; ++k) {
          if (++it[k] <= hi[k]) break;
          it[k] = lo[k];
        }
        done = (k == D);
      }
    }
  }

  std::ptrdiff_t clamp_axis(double v, int k) const {
    return std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::floor(v)), 0,
                                      dims_[k] - 1);
  }

  std::ptrdiff_t cell_of(const Vec<D>& x) const {
    std::size_t lin = 0;
    for (int k = D - 1; k >= 0; --k) {
      const double v = (x[k] - box_.lo[k]) / cell_size_;
      if (v < 0.0 || v >= static_cast<double>(dims_[k])) return -1;
      lin = lin * dims_[k] + static_cast<std::size_t>(v);
    }
    return static_cast<std::ptrdiff_t>(lin);
  }

  std::vector<Subdomain<D>> subdomains_;
  BoundingBox<D> box_;
  double cell_size_ = 0.0;
  std::ptrdiff_t dims_[D] = {};
  std::vector<std::vector<std::size_t>> cells_;
};

/// Fits one local interpolant per octree subdomain; embarrassingly parallel
/// and O(N) at fixed capacity.
template <int D>
inline PUField<D> fit_pu(const LabeledPoints<D>& samples, double rho,
                         std::size_t capacity, double overlap) {
  auto geoms = build_subdomains<D>(std::span<const Vec<D>>(samples.sites), capacity,
                                   overlap);
  std::vector<Subdomain<D>> subs(geoms.size());
  std::string first_error;

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(geoms.size()); ++i) {
    try {
      const auto& g = geoms[i];
      std::vector<Vec<D>> sites(g.members.size());
      std::vector<double> values(g.members.size());
      for (std::size_t j = 0; j < g.members.size(); ++j) {
        sites[j] = samples.sites[g.members[j]];
        values[j] = samples.values[g.members[j]];
      }
      subs[i].center = g.center;
      subs[i].radius = g.radius;
      subs[i].local = fit_local<D>(sites, values, rho);
    } catch (const std::exception& e) {
#pragma omp critical
      if (first_error.empty())
        first_error = "fit_pu: subdomain " + std::to_string(i) + ": " + e.what();
    }
  }
  if (!first_error.empty()) throw Error(first_error);
  return PUField<D>(std::move(subs));
}

template <int D>
inline double eval_pu(const PUField<D>& field, const Vec<D>& x) {
  return field.eval(x);
}

}  // namespace leafsurf
