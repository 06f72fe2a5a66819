#pragma once

// Explicit quotient maps and their numerical checks:
//   fold     R^2 -> R^2,  r e^{i t} -> r e^{2 i t}
//   prop42   R^3 -> R^2,  (x, a) -> r_a(|x|)^2 U_{2 pi / r_a(|x|)} x
//   prop41   X (+)_1 X (+)_1 R -> X,  (x, y, l) -> a g(x, l) + f(y, l)
//   prop311  (l_p^m)^n -> l_p^n, coordinate cut-offs g_k
//   linear   any matrix (reference map for tests)

#include "lipquot/lipfn.hpp"
#include "lipquot/preimage.hpp"
#include "lipquot/space.hpp"

#include <Eigen/Eigenvalues>

#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace lipquot {

enum class ZooKind { fold, prop41, prop42, prop311, linear };

inline std::string to_string(ZooKind k) {
  switch (k) {
    case ZooKind::fold: return "fold";
    case ZooKind::prop41: return "prop41";
    case ZooKind::prop42: return "prop42";
    case ZooKind::prop311: return "prop311";
    case ZooKind::linear: return "linear";
  }
  return "?";
}

inline ZooKind zoo_kind_from_string(const std::string& s) {
  if (s == "fold") return ZooKind::fold;
  if (s == "prop41") return ZooKind::prop41;
  if (s == "prop42") return ZooKind::prop42;
  if (s == "prop311") return ZooKind::prop311;
  if (s == "linear") return ZooKind::linear;
  throw UsageError("unknown map kind '" + s + "'");
}

// ---------------------------------------------------------------------------
// Separated nets

enum class NetOrder { shuffled, lattice };

namespace detail {

struct CellHash {
  std::size_t operator()(const std::vector<long long>& c) const {
    std::uint64_t h = 0x84222325CBF29CE4ULL;
    for (long long v : c) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

/// Uniform-grid bucket index for fixed-radius neighbour queries.
class PointIndex {
 public:
  PointIndex() = default;
  PointIndex(double cell, double p) : cell_(cell), p_(p) {}

  void insert(const Vector& v) {
    points_.push_back(v);
    cells_[key(v)].push_back(points_.size() - 1);
  }

  /// Index of a point at distance < radius (radius <= cell); the closest one if several.
  std::optional<std::size_t> nearest_within(const Vector& v, double radius) const {
    std::optional<std::size_t> best;
    double best_d = radius;
    visit_neighbours(v, [&](std::size_t i) {
      const double d = lp_norm(points_[i] - v, p_);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    });
    return best;
  }

  const std::vector<Vector>& points() const { return points_; }

 private:
  std::vector<long long> key(const Vector& v) const {
    std::vector<long long> k(v.size());
    for (int i = 0; i < v.size(); ++i) k[i] = static_cast<long long>(std::floor(v[i] / cell_));
    return k;
  }

  template <typename F>
  void visit_neighbours(const Vector& v, F&& fn) const {
    const auto base = key(v);
    const int m = static_cast<int>(base.size());
    std::vector<long long> k = base;
    std::vector<int> off(m, -1);
    while (true) {
      for (int i = 0; i < m; ++i) k[i] = base[i] + off[i];
      const auto it = cells_.find(k);
      if (it != cells_.end())
        for (std::size_t idx : it->second) fn(idx);
      int i = 0;
      while (i < m && off[i] == 1) off[i++] = -1;
      if (i == m) break;
      ++off[i];
    }
  }

  double cell_ = 1.0;
  double p_ = 2.0;
  std::vector<Vector> points_;
  std::unordered_map<std::vector<long long>, std::vector<std::size_t>, CellHash> cells_;
};

}  // namespace detail

/// Greedy maximal sep-separated set in the ball of radius region_radius.
/// Candidates are the grid of mesh sep/4 (shuffled by seed, or in lattice
/// order), followed by seeded random probes until a batch adds nothing.
inline std::vector<Vector> build_net(const NormedSpace& space, double sep, double region_radius, std::uint64_t seed,
                                     NetOrder order = NetOrder::shuffled) {
  require(sep > 0.0, "build_net: sep must be positive");
  if (region_radius <= 0.0) throw UsageError("build_net: region radius must be positive");
  const int m = space.dim();
  const double h = sep / 4.0;
  const long long per_axis = 2 * static_cast<long long>(std::floor(region_radius / h)) + 1;
  double total = 1.0;
  for (int i = 0; i < m; ++i) total *= static_cast<double>(per_axis);
  require(total <= 2e7, "build_net: candidate grid too large (increase sep or shrink the region)");
  const long long half = per_axis / 2;

  std::vector<Vector> cands;
  std::vector<long long> idx(m, -half);
  while (true) {
    Vector c(m);
    for (int i = 0; i < m; ++i) c[i] = h * static_cast<double>(idx[i]);
    if (space.norm(c) <= region_radius) cands.push_back(c);
    int i = 0;
    while (i < m && idx[i] == half) idx[i++] = -half;
    if (i == m) break;
    ++idx[i];
  }
  Rng rng(seed, "net_order");
  if (order == NetOrder::shuffled) rng.shuffle(cands);

  detail::PointIndex index(sep, space.p());
  for (const auto& c : cands)
    if (!index.nearest_within(c, sep)) index.insert(c);

  // repair pass: random probes fill holes the grid cannot see
  Rng probe(seed, "net_repair");
  const Norm norm = norm_fn(space);
  const int batch = 20000;
  for (int round = 0; round < 50; ++round) {
    int added = 0;
    for (int s = 0; s < batch; ++s) {
      const Vector q = sample_ball(norm, Vector::Zero(m), region_radius, probe);
      if (!index.nearest_within(q, sep)) {
        index.insert(q);
        ++added;
      }
    }
    if (added == 0) break;
  }
  return index.points();
}

// ---------------------------------------------------------------------------
// Map specifications

struct Prop41Params {
  int m = 2;              // dimension of X
  double p = 2.0;         // X = l_p^m
  double a = 0.5;
  int k_min = -8;
  int k_max = -2;
  double net_region = 1.5;
  std::uint64_t seed = 0;
  std::map<int, std::vector<Vector>> nets;  // level k -> net points u_{k,j}

  double y_margin() const { return net_region - 4.0 * std::ldexp(1.0, k_max); }
};

struct Prop311Params {
  int n = 1;  // outer slots (codomain dimension)
  int m = 1;  // inner coordinates per slot
  double p = 2.0;
};

namespace detail {
struct NetIndexSet {
  std::map<int, PointIndex> levels;
};
}  // namespace detail

struct ZooMapSpec {
  ZooKind kind = ZooKind::fold;
  Prop41Params prop41;
  Prop311Params prop311;
  std::optional<double> slice_a;  // prop42 restricted to the plane a = slice_a
  Matrix linear;
  std::shared_ptr<const detail::NetIndexSet> net_index;  // built from prop41.nets

  static ZooMapSpec fold() { return {}; }
  static ZooMapSpec prop42(std::optional<double> slice = std::nullopt) {
    ZooMapSpec s;
    s.kind = ZooKind::prop42;
    s.slice_a = slice;
    return s;
  }
  static ZooMapSpec prop311_map(int n, int m, double p) {
    require(n >= 1 && m >= 1, "prop311: n and m must be >= 1");
    require(p >= 1.0 && std::isfinite(p), "prop311: p must lie in [1, inf)");
    ZooMapSpec s;
    s.kind = ZooKind::prop311;
    s.prop311 = {n, m, p};
    return s;
  }
  static ZooMapSpec linear_map(Matrix a) {
    ZooMapSpec s;
    s.kind = ZooKind::linear;
    s.linear = std::move(a);
    return s;
  }

  int in_dim() const {
    switch (kind) {
      case ZooKind::fold: return 2;
      case ZooKind::prop42: return slice_a ? 2 : 3;
      case ZooKind::prop41: return 2 * prop41.m + 1;
      case ZooKind::prop311: return prop311.n * prop311.m;
      case ZooKind::linear: return static_cast<int>(linear.cols());
    }
    return 0;
  }
  int out_dim() const {
    switch (kind) {
      case ZooKind::fold:
      case ZooKind::prop42: return 2;
      case ZooKind::prop41: return prop41.m;
      case ZooKind::prop311: return prop311.n;
      case ZooKind::linear: return static_cast<int>(linear.rows());
    }
    return 0;
  }
};

/// Rebuilds the neighbour index for the stored nets (after construction or loading).
inline void index_nets(ZooMapSpec& spec) {
  auto set = std::make_shared<detail::NetIndexSet>();
  for (const auto& [k, pts] : spec.prop41.nets) {
    detail::PointIndex idx(4.0 * std::ldexp(1.0, k), spec.prop41.p);
    for (const auto& u : pts) idx.insert(u);
    set->levels.emplace(k, std::move(idx));
  }
  spec.net_index = std::move(set);
}

inline ZooMapSpec build_prop41(Prop41Params params, NetOrder order = NetOrder::shuffled) {
  require(params.m >= 1, "prop41: m must be >= 1");
  require(params.k_min <= params.k_max, "prop41: need k_min <= k_max");
  require(params.a > 0.0 && params.a <= 1.0, "prop41: a must lie in (0, 1]");
  require(params.y_margin() > 0.0, "prop41: net region must exceed 4 * 2^k_max");
  const NormedSpace x_space(params.m, params.p);
  params.nets.clear();
  for (int k = params.k_min; k <= params.k_max; ++k)
    params.nets[k] = build_net(x_space, 4.0 * std::ldexp(1.0, k), params.net_region,
                               derive_seed(params.seed, "prop41_net", static_cast<std::uint64_t>(k - params.k_min)),
                               order);
  ZooMapSpec s;
  s.kind = ZooKind::prop41;
  s.prop41 = std::move(params);
  index_nets(s);
  return s;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

inline Vector fold_eval(const Vector& z) {
  const double r = std::hypot(z[0], z[1]);
  if (r == 0.0) return Vector::Zero(2);
  return from_list({(z[0] * z[0] - z[1] * z[1]) / r, 2.0 * z[0] * z[1] / r});
}

inline double r_a(double a, double t) {
  const double aa = std::abs(a);
  if (aa > 1.0) return 1.0;
  if (t <= 1.0) return aa;
  if (t < 2.0) return 1.0 - (1.0 - aa) * (2.0 - t);
  return 1.0;
}

inline Vector prop42_eval(const Vector& x, double a) {
  const double ra = r_a(a, std::hypot(x[0], x[1]));
  if (ra == 0.0) return Vector::Zero(2);
  // reduce the angle exactly so that a full turn is the identity bit for bit
  const double theta = std::remainder(2.0 * std::numbers::pi / ra, 2.0 * std::numbers::pi);
  const double c = theta == 0.0 ? 1.0 : std::cos(theta), s = theta == 0.0 ? 0.0 : std::sin(theta);
  const double r2 = ra * ra;
  return from_list({r2 * (c * x[0] - s * x[1]), r2 * (s * x[0] + c * x[1])});
}

inline double cutoff(int k, double t) {
  const double hi = std::ldexp(1.0, -k), lo = 0.5 * hi;
  const double at = std::abs(t);
  double v;
  if (at >= hi)
    v = at;
  else if (at <= lo)
    v = 0.0;
  else
    v = 2.0 * at - hi;
  return t < 0 ? -v : v;
}

inline double prop311_slot(const Prop311Params& pr, const double* a) {
  double pos = 0.0, neg = 0.0;
  const double p = pr.p;
  // scale-free l_p sums: accumulate powers directly (values are at most moderate)
  for (int k = 0; k < pr.m; ++k) {
    const double v = cutoff(k, a[k]);
    if (v > 0)
      pos += p == 2.0 ? v * v : std::pow(v, p);
    else if (v < 0)
      neg += p == 2.0 ? v * v : std::pow(-v, p);
  }
  const double pp = p == 2.0 ? std::sqrt(pos) : std::pow(pos, 1.0 / p);
  const double nn = p == 2.0 ? std::sqrt(neg) : std::pow(neg, 1.0 / p);
  return pp - nn;
}

inline Vector prop311_eval(const Prop311Params& pr, const Vector& z) {
  Vector out(pr.n);
  for (int i = 0; i < pr.n; ++i) out[i] = prop311_slot(pr, z.data() + i * pr.m);
  return out;
}

inline Vector prop41_level(const ZooMapSpec& spec, int k, const Vector& y) {
  const auto& idx = spec.net_index->levels.at(k);
  const double two_k = std::ldexp(1.0, k);
  Vector out = Vector::Zero(y.size());
  const auto hit = idx.nearest_within(y, 2.0 * two_k);
  if (!hit) return out;
  const Vector d = y - idx.points()[*hit];
  const double dist = lp_norm(d, spec.prop41.p);
  if (dist == 0.0) return out;
  const double phi = std::max(0.0, two_k - std::abs(dist - two_k));
  return d * (phi / dist);
}

inline Vector prop41_f(const ZooMapSpec& spec, const Vector& y, double lambda) {
  const auto& pr = spec.prop41;
  const double l = std::abs(lambda);
  if (l == 0.0) return Vector::Zero(y.size());
  const double lo = std::ldexp(1.0, pr.k_min), hi = std::ldexp(1.0, pr.k_max);
  if (l >= hi) return prop41_level(spec, pr.k_max, y);
  if (l < lo) return prop41_level(spec, pr.k_min, y) * (l / lo);
  int e = 0;
  std::frexp(l, &e);  // l = f 2^e with f in [1/2, 1)
  const int k = e - 1;
  const double two_k = std::ldexp(1.0, k);
  const double w = (l - two_k) / two_k;
  if (w == 0.0) return prop41_level(spec, k, y);
  return (1.0 - w) * prop41_level(spec, k, y) + w * prop41_level(spec, k + 1, y);
}

inline Vector prop41_g(const Vector& x, double lambda, double p) {
  const double s = std::min(std::max(std::abs(lambda), lp_norm(x, p) - 1.0), 1.0);
  return s * x;
}

inline Vector prop41_eval(const ZooMapSpec& spec, const Vector& point) {
  const auto& pr = spec.prop41;
  const Vector x = point.head(pr.m), y = point.segment(pr.m, pr.m);
  const double lambda = point[2 * pr.m];
  if (lp_norm(y, pr.p) > pr.y_margin() + 1e-12)
    throw UsageError("prop41: point outside the net region (||y|| > net_region - 4*2^k_max)");
  return pr.a * prop41_g(x, lambda, pr.p) + prop41_f(spec, y, lambda);
}

}  // namespace detail

inline Vector zoo_eval(const ZooMapSpec& spec, const Vector& point) {
  if (point.size() != spec.in_dim())
    throw UsageError("zoo_eval: expected a point of dimension " + std::to_string(spec.in_dim()));
  switch (spec.kind) {
    case ZooKind::fold: return detail::fold_eval(point);
    case ZooKind::prop42:
      return spec.slice_a ? detail::prop42_eval(point, *spec.slice_a) : detail::prop42_eval(point.head(2), point[2]);
    case ZooKind::prop41:
      require(spec.net_index != nullptr, "prop41: nets are not indexed");
      return detail::prop41_eval(spec, point);
    case ZooKind::prop311: return detail::prop311_eval(spec.prop311, point);
    case ZooKind::linear: return spec.linear * point;
  }
  throw UsageError("zoo_eval: unknown kind");
}

inline double zoo_lip_bound(const ZooMapSpec& spec);

/// Spaces on either side of the map.
inline NormedSpace zoo_domain_space(const ZooMapSpec& spec) {
  if (spec.kind == ZooKind::prop41) return NormedSpace::l1_sum({spec.prop41.m, spec.prop41.m, 1}, spec.prop41.p);
  if (spec.kind == ZooKind::prop311) return {spec.in_dim(), spec.prop311.p};
  return NormedSpace::euclidean(spec.in_dim());
}

inline NormedSpace zoo_codomain_space(const ZooMapSpec& spec) {
  if (spec.kind == ZooKind::prop41) return {spec.out_dim(), spec.prop41.p};
  if (spec.kind == ZooKind::prop311) return {spec.out_dim(), spec.prop311.p};
  return NormedSpace::euclidean(spec.out_dim());
}

inline Norm zoo_domain_norm(const ZooMapSpec& spec) { return norm_fn(zoo_domain_space(spec)); }
inline Norm zoo_codomain_norm(const ZooMapSpec& spec) { return norm_fn(zoo_codomain_space(spec)); }

/// The map as a LipschitzFunction on a domain ball (codomain norm attached).
inline LipschitzFunction zoo_function(const ZooMapSpec& spec, Ball domain) {
  LipschitzFunction f([spec](const Vector& x) { return zoo_eval(spec, x); }, spec.out_dim(), std::move(domain),
                      zoo_lip_bound(spec));
  f.with_codomain(zoo_codomain_space(spec));
  return f;
}

/// Declared Lipschitz upper bounds, used only for screening thresholds.
inline double zoo_lip_bound(const ZooMapSpec& spec) {
  switch (spec.kind) {
    case ZooKind::fold: return 2.0;
    case ZooKind::prop42: return 25.0;
    case ZooKind::prop41: return 4.0;
    case ZooKind::prop311: return 4.0;
    case ZooKind::linear:
      return spec.linear.size() == 0 ? 0.0 : Eigen::JacobiSVD<Matrix>(spec.linear).singularValues()(0);
  }
  return kInf;
}

inline MapView zoo_view(const ZooMapSpec& spec) {
  MapView v;
  v.in_dim = spec.in_dim();
  v.out_dim = spec.out_dim();
  v.eval = [spec](const Vector& x) { return zoo_eval(spec, x); };
  v.domain_norm = zoo_domain_norm(spec);
  v.codomain_norm = zoo_codomain_norm(spec);
  v.lip_bound = zoo_lip_bound(spec);
  v.name = to_string(spec.kind);
  return v;
}

inline CoverReport cover_check(const ZooMapSpec& spec, const Vector& center, double r, double rho, int budget,
                               std::uint64_t seed, CoverMode mode, const CoverOptions& opt = {}) {
  return cover_check(zoo_view(spec), center, r, rho, budget, seed, mode, opt);
}

// ---------------------------------------------------------------------------
// Constructive solve for the l_p cut-off map

struct Prop311SlotTrace {
  int slot = 0;
  double b = 0.0;
  double A = 0.0;
  std::string branch;  // "none", "single", "scale"
  int k = -1;          // coordinate used by the single-coordinate branch
  double multiplier = 0.0;
};

struct Prop311Solution {
  Vector z;
  double residual = 0.0;  // ||f(z) - y||_p
  double ratio = 0.0;     // ||z - x||_p / ||f(x) - y||_p (0 when y = f(x))
  std::vector<Prop311SlotTrace> slots;
};

namespace detail {

/// Bisection for the root of a nondecreasing continuous h on [lo, hi] with h(lo) <= 0 <= h(hi).
template <typename H>
double monotone_root(H&& h, double lo, double hi, double tol) {
  for (int it = 0; it < 300 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline Prop311Solution prop311_solve(const ZooMapSpec& spec, const Vector& x, const Vector& y) {
  require(spec.kind == ZooKind::prop311, "prop311_solve: spec must be prop311");
  const auto& pr = spec.prop311;
  if (x.size() != pr.n * pr.m) throw UsageError("prop311_solve: x has the wrong dimension");
  if (y.size() != pr.n) throw UsageError("prop311_solve: y has the wrong dimension");
  const double p = pr.p;
  Prop311Solution sol;
  sol.z = x;
  const Vector fx = detail::prop311_eval(pr, x);
  for (int n = 0; n < pr.n; ++n) {
    Prop311SlotTrace tr;
    tr.slot = n;
    tr.b = y[n] - fx[n];
    if (tr.b == 0.0) {
      tr.branch = "none";
      sol.slots.push_back(tr);
      continue;
    }
    // work with sigma * slot so that the gap is positive; f is odd in each slot
    const double sigma = tr.b > 0 ? 1.0 : -1.0;
    const double b = std::abs(tr.b);
    std::vector<double> s(pr.m);
    for (int k = 0; k < pr.m; ++k) s[k] = sigma * x[n * pr.m + k];
    const double target = sigma * y[n];
    double apow = 0.0;
    for (int k = 0; k < pr.m; ++k) {
      const double v = detail::cutoff(k, std::max(s[k], 0.0));
      apow += std::pow(v, p);
    }
    tr.A = std::pow(apow, 1.0 / p);
    const double tol = 1e-14 * std::max(1.0, b);
    const double slack = 1e-12 * std::max(1.0, std::abs(target));  // rounding at an exact endpoint root
    int kn = -1;
    if (tr.A <= b)
      for (int k = 0; k < pr.m; ++k)
        if (b + s[k] > std::ldexp(1.0, -k)) {
          kn = k;
          break;
        }
    if (tr.A <= b && kn < 0 && tr.A == 0.0)
      throw NumericalFailure("prop311_solve: no coordinate k < m with b + a_k > 2^-k in slot " + std::to_string(n) +
                             " (truncation m too small for this target)");
    if (kn >= 0) {
      std::vector<double> trial = s;
      auto h = [&](double alpha) {
        trial[kn] = s[kn] + alpha;
        return detail::prop311_slot(pr, trial.data()) - target;
      };
      const double hi = 10.0 * b;
      if (h(hi) < -slack)
        throw NumericalFailure("prop311_solve: alpha bracket [0, 10 b] failed in slot " + std::to_string(n));
      const double alpha = detail::monotone_root(h, 0.0, hi, tol);
      s[kn] += alpha;
      tr.branch = "single";
      tr.k = kn;
      tr.multiplier = alpha;
    } else {
      // A >= b, or A < b with the threshold index beyond the truncation:
      // scale the support of the positive part (P(beta) >= (1 + beta) A)
      std::vector<double> trial = s;
      auto h = [&](double beta) {
        for (int k = 0; k < pr.m; ++k)
          if (s[k] > std::ldexp(1.0, -k - 1)) trial[k] = (1.0 + beta) * s[k];
        return detail::prop311_slot(pr, trial.data()) - target;
      };
      const double hi = b / tr.A;
      if (h(hi) < -slack) throw NumericalFailure("prop311_solve: scaling bracket failed in slot " + std::to_string(n));
      const double beta = detail::monotone_root(h, 0.0, hi, 1e-16 * std::max(1.0, hi));
      h(beta);
      s = trial;
      tr.branch = "scale";
      tr.multiplier = beta;
    }
    for (int k = 0; k < pr.m; ++k) sol.z[n * pr.m + k] = sigma * s[k];
    sol.slots.push_back(tr);
  }
  const Vector fz = detail::prop311_eval(pr, sol.z);
  sol.residual = lp_norm(fz - y, p);
  const double gap = lp_norm(fx - y, p);
  sol.ratio = gap > 0.0 ? lp_norm(sol.z - x, p) / gap : 0.0;
  if (sol.residual > 1e-8)
    throw NumericalFailure("prop311_solve: residual " + std::to_string(sol.residual) + " above 1e-8");
  return sol;
}

// ---------------------------------------------------------------------------
// Derivative checks

struct JacobianReport {
  Matrix jacobian;
  double min_singular_value = 0.0;
};

/// Smallest singular value of J via inverse iteration on the smaller Gram matrix.
inline double min_singular_value(const Matrix& j, double tol = 1e-8) {
  const Matrix g = j.rows() <= j.cols() ? Matrix(j * j.transpose()) : Matrix(j.transpose() * j);
  const int n = static_cast<int>(g.rows());
  if (n == 0) return 0.0;
  const double scale = std::max(g.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  if (g.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const double shift = 1e-13 * scale;
  Matrix shifted = g;
  shifted.diagonal().array() += shift;
  const auto ldlt = shifted.ldlt();
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  double lam = v.dot(g * v);
  for (int it = 0; it < 500; ++it) {
    Vector w = ldlt.solve(v);
    const double nw = w.norm();
    if (!(nw > 0.0) || !std::isfinite(nw)) break;
    w /= nw;
    const double next = w.dot(g * w);
    v = w;
    if (std::abs(next - lam) <= tol * scale) {
      lam = next;
      break;
    }
    lam = next;
  }
  const double val = std::sqrt(std::max(lam, 0.0));
  // below the shift the iteration cannot resolve the value
  return val * val <= 10.0 * shift ? (lam <= 0.0 ? 0.0 : val) : val;
}

inline JacobianReport jacobian_check(const ZooMapSpec& spec, const Vector& point, double h) {
  require(h > 0.0, "jacobian_check: h must be positive");
  const int n = spec.in_dim(), m = spec.out_dim();
  if (point.size() != n) throw UsageError("jacobian_check: point has the wrong dimension");
  JacobianReport rep;
  rep.jacobian.resize(m, n);
  Vector q = point;
  for (int k = 0; k < n; ++k) {
    q[k] = point[k] + h;
    const Vector plus = zoo_eval(spec, q);
    q[k] = point[k] - h;
    const Vector minus = zoo_eval(spec, q);
    q[k] = point[k];
    rep.jacobian.col(k) = (plus - minus) / (2.0 * h);
  }
  rep.min_singular_value = min_singular_value(rep.jacobian);
  return rep;
}

struct DirectionalReport {
  Vector limit;
  bool converged = false;
  std::vector<double> ts;
  std::vector<Vector> quotients;
};

/// Difference quotients (T(p + t u) - T(p))/t for t = t_min 2^j, j = steps-1 .. 0,
/// Richardson-extrapolated at the smallest pair of steps.
inline DirectionalReport directional_derivative(const ZooMapSpec& spec, const Vector& point, const Vector& dir,
                                                double t_min, int steps = 20) {
  require(t_min > 0.0, "directional_derivative: t_min must be positive");
  require(steps >= 3, "directional_derivative: need at least 3 steps");
  if (point.size() != spec.in_dim() || dir.size() != spec.in_dim())
    throw UsageError("directional_derivative: dimension mismatch");
  const double nd = zoo_domain_norm(spec)(dir);
  require(std::abs(nd - 1.0) <= 1e-9, "directional_derivative: direction must have unit norm");
  DirectionalReport rep;
  const Vector base = zoo_eval(spec, point);
  for (int j = steps - 1; j >= 0; --j) {
    const double t = std::ldexp(t_min, j);
    rep.ts.push_back(t);
    rep.quotients.push_back((zoo_eval(spec, point + t * dir) - base) / t);
  }
  const std::size_t last = rep.quotients.size() - 1;
  rep.limit = 2.0 * rep.quotients[last] - rep.quotients[last - 1];
  double spread = 0.0;
  for (std::size_t i = last - 2; i <= last; ++i)
    spread = std::max(spread, (rep.quotients[i] - rep.quotients[last]).cwiseAbs().maxCoeff());
  rep.converged = spread <= 1e-4;
  return rep;
}

}  // namespace lipquot
