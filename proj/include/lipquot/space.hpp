#pragma once

// Finite-dimensional l_p spaces, norming functionals, and a sampled estimate
// of the uniform-smoothness threshold delta(eps).

#include "lipquot/core.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace lipquot {

inline double lp_norm(const Vector& v, double p) {
  if (std::isinf(p)) return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
  if (p == 1.0) return v.cwiseAbs().sum();
  if (p == 2.0) return v.norm();
  // scale by the max entry so that |v_i|^p neither overflows nor underflows
  const double m = v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]) / m, p);
  return m * std::pow(s, 1.0 / p);
}

/// Conjugate exponent q with 1/p + 1/q = 1.
inline double dual_exponent(double p) {
  if (std::isinf(p)) return 1.0;
  if (p == 1.0) return kInf;
  return p / (p - 1.0);
}

class NormedSpace {
 public:
  NormedSpace(int dim, double p) : dim_(dim), p_(p) {
    require(dim >= 1, "space dimension must be >= 1");
    require(p >= 1.0, "exponent p must be >= 1");
  }

  static NormedSpace euclidean(int dim) { return {dim, 2.0}; }
  static NormedSpace linf(int dim) { return {dim, kInf}; }
  /// l_1-sum of l_p blocks of the given sizes: ||v|| = sum_b ||v_b||_p.
  static NormedSpace l1_sum(std::vector<int> blocks, double p) {
    int dim = 0;
    for (int b : blocks) {
      require(b >= 1, "block sizes must be >= 1");
      dim += b;
    }
    NormedSpace s(dim, p);
    if (blocks.size() > 1) s.blocks_ = std::move(blocks);
    return s;
  }

  int dim() const { return dim_; }
  double p() const { return p_; }
  double q() const { return dual_exponent(p_); }
  bool is_plain() const { return blocks_.empty(); }
  const std::vector<int>& blocks() const { return blocks_; }
  bool is_smooth() const { return is_plain() && p_ > 1.0 && !std::isinf(p_); }

  double norm(const Vector& v) const {
    check_dim(v);
    if (blocks_.empty()) return lp_norm(v, p_);
    double s = 0.0;
    int at = 0;
    for (int b : blocks_) {
      s += lp_norm(v.segment(at, b), p_);
      at += b;
    }
    return s;
  }
  double distance(const Vector& a, const Vector& b) const { return norm(a - b); }

  void check_dim(const Vector& v) const {
    if (v.size() != dim_)
      throw UsageError("dimension mismatch: expected " + std::to_string(dim_) + ", got " +
                       std::to_string(v.size()));
  }

  std::string describe() const {
    const std::string base = "l_" + (std::isinf(p_) ? std::string("inf") : std::to_string(p_));
    if (blocks_.empty()) return base + "^" + std::to_string(dim_);
    std::string out = "l_1-sum(";
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      out += (i ? ", " : "") + base + "^" + std::to_string(blocks_[i]);
    return out + ")";
  }

  bool operator==(const NormedSpace&) const = default;

 private:
  int dim_;
  double p_;
  std::vector<int> blocks_;
};

/// Element of the dual of a NormedSpace, acting by the coordinate pairing.
struct DualVector {
  Vector coords;
  NormedSpace space;

  double pair(const Vector& v) const {
    space.check_dim(v);
    return coords.dot(v);
  }
  double dual_norm() const { return lp_norm(coords, space.q()); }
};

/// Unique norming functional of v in a smooth l_p space: unit dual norm and
/// <z*, v> = ||v||.
inline DualVector duality_map(const NormedSpace& space, const Vector& v) {
  space.check_dim(v);
  if (!space.is_smooth())
    throw UsageError("norming functional is not unique for p = 1 or p = inf (non-smooth norm)");
  const double nv = space.norm(v);
  if (nv == 0.0) throw UsageError("duality map is undefined at the zero vector");
  Vector z(v.size());
  const double p = space.p();
  for (int i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) / nv;
    z[i] = (v[i] > 0 ? 1.0 : (v[i] < 0 ? -1.0 : 0.0)) * (p == 2.0 ? a : std::pow(a, p - 1.0));
  }
  return {z, space};
}

struct SmoothnessOptions {
  int samples = 100000;
  std::uint64_t seed = 0;
  double safety = 0.9;
  int bisection_steps = 60;
};

inline constexpr double kMaxSmoothnessDelta = 0.49;

/// Largest first-order remainder ratio |r(y)|/||y|| over the sampled unit
/// points x and directions u at radius ||y|| = delta. Because
/// y -> ||x+y|| - 1 - x*(y) is convex and vanishes at 0, the ratio is
/// nondecreasing in delta, which makes bisection on delta valid.
namespace detail {

struct RemainderSamples {
  std::vector<Vector> points;
  std::vector<Vector> functionals;
  std::vector<Vector> directions;
};

inline RemainderSamples remainder_samples(const NormedSpace& space, const SmoothnessOptions& opt) {
  RemainderSamples s;
  Rng rng(opt.seed, "smoothness_delta");
  const int n = space.dim();
  auto unit = [&](Vector v) { return Vector(v / space.norm(v)); };
  // structured centres: coordinate axes and the diagonal
  std::vector<Vector> centres;
  for (int i = 0; i < n; ++i) {
    Vector e = Vector::Zero(n);
    e[i] = 1.0;
    centres.push_back(e);
  }
  centres.push_back(unit(Vector::Ones(n)));
  for (int k = 0; k < opt.samples; ++k) {
    Vector x = k < static_cast<int>(centres.size()) * 8 ? centres[k % centres.size()] : unit(rng.normal_vector(n));
    Vector u = unit(rng.normal_vector(n));
    s.functionals.push_back(duality_map(space, x).coords);
    s.points.push_back(std::move(x));
    s.directions.push_back(std::move(u));
  }
  return s;
}

inline double worst_remainder_ratio(const NormedSpace& space, const RemainderSamples& s, double delta) {
  double worst = 0.0;
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const Vector y = delta * s.directions[i];
    const double r = space.norm(s.points[i] + y) - 1.0 - s.functionals[i].dot(y);
    worst = std::max(worst, std::abs(r) / delta);
  }
  return worst;
}

}  // namespace detail

/// Threshold delta(eps) such that ||x + y|| = 1 + x*(y) + r(y) with
/// |r(y)| <= eps ||y|| whenever ||x|| = 1 and ||y|| <= delta.
/// Closed form for p = 2 (|r(y)| <= ||y||^2 / 2); seeded sampling plus
/// bisection with a safety factor otherwise.
inline double smoothness_delta(const NormedSpace& space, double eps, const SmoothnessOptions& opt = {}) {
  if (!space.is_smooth()) throw UsageError("smoothness_delta requires 1 < p < inf");
  require(eps > 0.0 && eps < 0.5, "eps must lie in (0, 1/2)");
  if (space.p() == 2.0) return std::min(2.0 * eps, kMaxSmoothnessDelta);

  const auto samples = detail::remainder_samples(space, opt);
  if (detail::worst_remainder_ratio(space, samples, kMaxSmoothnessDelta) <= eps)
    return opt.safety * kMaxSmoothnessDelta;
  double lo = 0.0, hi = kMaxSmoothnessDelta;
  for (int it = 0; it < opt.bisection_steps; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detail::worst_remainder_ratio(space, samples, mid) <= eps)
      lo = mid;
    else
      hi = mid;
  }
  if (lo <= 0.0) throw NumericalFailure("smoothness_delta: no admissible delta found by bisection");
  return opt.safety * lo;
}

}  // namespace lipquot
