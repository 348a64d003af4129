#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace leafsurf {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;
using Vec2 = Vec<2>;
using Vec3 = Vec<3>;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Query point lies outside the evaluable domain of a field. Distinct from
/// numeric failures so callers can clip query grids instead of aborting.
class OutsideDomainError : public Error {
public:
  explicit OutsideDomainError(const std::string& msg) : Error(msg) {}
};

/// Scattered sample sites with one scalar value each (heights or
/// radio-densities).
template <int D>
struct LabeledPoints {
  std::vector<Vec<D>> sites;
  std::vector<double> values;

  std::size_t size() const { return sites.size(); }
};

template <int D>
struct BoundingBox {
  Vec<D> lo = Vec<D>::Constant(std::numeric_limits<double>::infinity());
  Vec<D> hi = Vec<D>::Constant(-std::numeric_limits<double>::infinity());

  void expand(const Vec<D>& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Vec<D> center() const { return 0.5 * (lo + hi); }
  Vec<D> extent() const { return hi - lo; }
  bool contains(const Vec<D>& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  double diagonal() const { return (hi - lo).norm(); }
};

template <int D>
BoundingBox<D> bounding_box(std::span<const Vec<D>> pts) {
  BoundingBox<D> box;
  for (const auto& p : pts) box.expand(p);
  return box;
}

}  // namespace leafsurf
