#pragma once

// Map handles and the single preimage engine every existence claim goes
// through: seeded multi-start damped Gauss-Newton (Levenberg-Marquardt) with
// finite-difference Jacobians, constrained by a retraction onto the search
// region. Results are never trusted without the residual check.

#include "lipquot/space.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lipquot {

using Norm = std::function<double(const Vector&)>;

inline Norm lp_norm_fn(double p) {
  return [p](const Vector& v) { return lp_norm(v, p); };
}

inline Norm norm_fn(const NormedSpace& space) {
  if (space.is_plain()) return lp_norm_fn(space.p());
  return [space](const Vector& v) { return space.norm(v); };
}

/// An evaluable map between coordinate spaces together with the norms used
/// to measure distances on either side.
struct MapView {
  int in_dim = 0;
  int out_dim = 0;
  std::function<Vector(const Vector&)> eval;
  Norm domain_norm = lp_norm_fn(2.0);
  Norm codomain_norm = lp_norm_fn(2.0);
  double lip_bound = kInf;  // declared upper bound, used for screening only
  std::string name;

  Vector operator()(const Vector& x) const { return eval(x); }
};

inline MapView linear_view(const Matrix& a, std::string name = "linear") {
  MapView m;
  m.in_dim = static_cast<int>(a.cols());
  m.out_dim = static_cast<int>(a.rows());
  m.eval = [a](const Vector& x) { return Vector(a * x); };
  m.lip_bound = a.size() == 0 ? 0.0 : Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
  m.name = std::move(name);
  return m;
}

using Retraction = std::function<Vector(const Vector&)>;

/// Radial retraction onto the closed ball B_r(c) of an arbitrary norm.
inline Retraction ball_retraction(Norm norm, Vector center, double radius) {
  return [norm = std::move(norm), c = std::move(center), radius](const Vector& p) -> Vector {
    const Vector d = p - c;
    const double n = norm(d);
    if (n <= radius) return p;
    return c + d * (radius / n);
  };
}

inline Retraction box_retraction(Vector lo, Vector hi) {
  return [lo = std::move(lo), hi = std::move(hi)](const Vector& p) -> Vector { return p.cwiseMax(lo).cwiseMin(hi); };
}

/// Uniform-ish sample in the unit ball of `norm` scaled to B_r(c).
inline Vector sample_ball(const Norm& norm, const Vector& center, double radius, Rng& rng) {
  const int n = static_cast<int>(center.size());
  Vector g = rng.normal_vector(n);
  double ng = norm(g);
  while (ng == 0.0) {
    g = rng.normal_vector(n);
    ng = norm(g);
  }
  const double s = radius * std::pow(rng.uniform(), 1.0 / n);
  return center + g * (s / ng);
}

struct PreimageOptions {
  int starts = 32;
  int iterations = 500;
  double tol = 1e-6;
  double fd_step = 1e-7;
  int stall_limit = 40;
  std::uint64_t seed = 0;
};

struct PreimageResult {
  Vector point;
  double residual = kInf;
  bool converged = false;
  int starts_used = 0;
};

namespace detail {

inline Matrix fd_jacobian(const MapView& map, const Vector& p, const Vector& fp, double step) {
  Matrix j(map.out_dim, map.in_dim);
  Vector q = p;
  for (int k = 0; k < map.in_dim; ++k) {
    const double h = step * std::max(1.0, std::abs(p[k]));
    q[k] = p[k] + h;
    const Vector fplus = map(q);
    q[k] = p[k] - h;
    const Vector fminus = map(q);
    q[k] = p[k];
    j.col(k) = (fplus - fminus) / (2.0 * h);
  }
  (void)fp;
  return j;
}

/// Levenberg-Marquardt step, using the smaller of the two normal systems.
inline Vector lm_step(const Matrix& j, const Vector& r, double mu) {
  if (j.rows() < j.cols()) {
    Matrix a = j * j.transpose();
    a.diagonal().array() += mu;
    return -j.transpose() * a.ldlt().solve(r);
  }
  Matrix a = j.transpose() * j;
  a.diagonal().array() += mu;
  return -a.ldlt().solve(j.transpose() * r);
}

}  // namespace detail

/// Damped Gauss-Newton from one start; returns the best point visited.
inline PreimageResult descend(const MapView& map, const Vector& target, const Vector& start,
                              const Retraction& retract, const PreimageOptions& opt) {
  PreimageResult out;
  Vector p = retract(start);
  Vector fp = map(p);
  Vector r = fp - target;
  double cost = r.squaredNorm();
  out.point = p;
  out.residual = map.codomain_norm(r);
  if (out.residual <= opt.tol) {
    out.converged = true;
    return out;
  }
  double mu = -1.0;
  int stall = 0;
  for (int it = 0; it < opt.iterations; ++it) {
    const Matrix j = detail::fd_jacobian(map, p, fp, opt.fd_step);
    if (mu < 0.0) mu = 1e-3 * std::max(1e-12, (j.transpose() * j).diagonal().maxCoeff());
    bool improved = false;
    for (int tries = 0; tries < 12 && !improved; ++tries) {
      const Vector step = detail::lm_step(j, r, mu);
      if (!step.allFinite()) {
        mu *= 10.0;
        continue;
      }
      const Vector q = retract(p + step);
      const Vector fq = map(q);
      const Vector rq = fq - target;
      const double cq = rq.squaredNorm();
      if (cq < cost) {
        p = q;
        fp = fq;
        r = rq;
        cost = cq;
        mu = std::max(mu / 3.0, 1e-15);
        improved = true;
      } else {
        mu *= 4.0;
      }
    }
    const double res = map.codomain_norm(r);
    if (res < out.residual) {
      out.residual = res;
      out.point = p;
      stall = 0;
    } else {
      ++stall;
    }
    if (out.residual <= opt.tol) {
      out.converged = true;
      return out;
    }
    if (!improved || stall > opt.stall_limit || mu > 1e14) break;
  }
  return out;
}

/// Multi-start search for p with T(p) = target inside the region described
/// by `retract`; `sampler` draws fresh starting points.
inline PreimageResult solve_preimage(const MapView& map, const Vector& target, const Retraction& retract,
                                     const std::function<Vector(Rng&)>& sampler,
                                     const std::vector<Vector>& warm_starts, const PreimageOptions& opt) {
  Rng rng(opt.seed, "preimage_starts");
  PreimageResult best;
  const int total = std::max<int>(opt.starts, static_cast<int>(warm_starts.size()));
  for (int s = 0; s < total; ++s) {
    const Vector start = s < static_cast<int>(warm_starts.size()) ? warm_starts[s] : sampler(rng);
    PreimageResult res = descend(map, target, start, retract, opt);
    res.starts_used = s + 1;
    if (res.residual < best.residual || best.point.size() == 0) best = res;
    best.starts_used = s + 1;
    if (best.converged) break;
  }
  return best;
}

/// Preimage inside the closed ball B_radius(center) of the map's domain norm.
inline PreimageResult solve_preimage_in_ball(const MapView& map, const Vector& target, const Vector& center,
                                             double radius, const PreimageOptions& opt,
                                             std::vector<Vector> warm_starts = {}) {
  warm_starts.push_back(center);
  const Retraction retract = ball_retraction(map.domain_norm, center, radius);
  return solve_preimage(
      map, target, retract, [&](Rng& rng) { return sample_ball(map.domain_norm, center, radius, rng); },
      warm_starts, opt);
}

// ---------------------------------------------------------------------------
// Ball-cover certification: T B_r(x) contains B_rho(T x)?

enum class CoverMode { verify, bisect };

struct CoverReport {
  Vector center;
  double r = 0.0;
  double rho = 0.0;
  int targets_tried = 0;
  double worst_residual = 0.0;
  bool covered = false;
  std::optional<double> covered_radius_estimate;
  double tol = 1e-6;
};

struct CoverOptions {
  PreimageOptions solver{};
  int bisection_steps = 20;
  int max_doublings = 12;
};

namespace detail {

inline std::vector<Vector> sphere_directions(const MapView& map, int count, std::uint64_t seed) {
  Rng rng(seed, "cover_targets");
  std::vector<Vector> dirs;
  dirs.reserve(count);
  for (int k = 0; k < count; ++k) {
    Vector g = rng.normal_vector(map.out_dim);
    double n = map.codomain_norm(g);
    while (n == 0.0) {
      g = rng.normal_vector(map.out_dim);
      n = map.codomain_norm(g);
    }
    dirs.push_back(g / n);
  }
  return dirs;
}

inline double worst_cover_residual(const MapView& map, const Vector& center, double r, double rho,
                                   const std::vector<Vector>& dirs, std::uint64_t seed,
                                   const CoverOptions& opt) {
  const Vector image = map(center);
  std::vector<double> residuals(dirs.size(), 0.0);
  parallel_for(dirs.size(), [&](std::size_t k) {
    PreimageOptions sopt = opt.solver;
    sopt.seed = derive_seed(seed, "cover_target", k);
    residuals[k] = solve_preimage_in_ball(map, image + rho * dirs[k], center, r, sopt).residual;
  });
  double worst = 0.0;
  for (double v : residuals) worst = std::max(worst, v);
  return worst;
}

}  // namespace detail

inline CoverReport cover_check(const MapView& map, const Vector& center, double r, double rho, int budget,
                               std::uint64_t seed, CoverMode mode, const CoverOptions& opt = {}) {
  require(static_cast<int>(center.size()) == map.in_dim, "cover_check: centre dimension mismatch");
  require(r > 0.0, "cover_check: r must be positive");
  require(budget >= 1, "cover_check: budget must be >= 1");
  CoverReport rep;
  rep.center = center;
  rep.r = r;
  rep.tol = opt.solver.tol;
  const auto dirs = detail::sphere_directions(map, budget, seed);
  if (mode == CoverMode::verify) {
    require(rho > 0.0, "cover_check: rho must be positive in verify mode");
    rep.rho = rho;
    rep.targets_tried = budget;
    rep.worst_residual = detail::worst_cover_residual(map, center, r, rho, dirs, seed, opt);
    rep.covered = rep.worst_residual <= opt.solver.tol;
    return rep;
  }
  // bisect: grow the bracket until a radius fails, then halve it. Radii not
  // above twice the residual tolerance are unresolvable and count as failures.
  const double resolvable = 2.0 * opt.solver.tol;
  double lo = 0.0;
  double hi = rho > 0.0 ? rho : r * (std::isfinite(map.lip_bound) && map.lip_bound > 0 ? map.lip_bound : 1.0);
  double worst_at_lo = 0.0;
  int tried = 0;
  for (int d = 0; d < opt.max_doublings; ++d) {
    const double w = detail::worst_cover_residual(map, center, r, hi, dirs, seed, opt);
    tried += budget;
    if (w > opt.solver.tol || hi <= resolvable) break;
    lo = hi;
    worst_at_lo = w;
    hi *= 2.0;
  }
  for (int it = 0; it < opt.bisection_steps; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double w = detail::worst_cover_residual(map, center, r, mid, dirs, seed, opt);
    tried += budget;
    if (w <= opt.solver.tol && mid > resolvable) {
      lo = mid;
      worst_at_lo = w;
    } else {
      hi = mid;
    }
  }
  rep.rho = lo;
  rep.targets_tried = tried;
  rep.worst_residual = worst_at_lo;
  rep.covered = lo > 0.0;
  rep.covered_radius_estimate = lo;
  return rep;
}

}  // namespace lipquot
