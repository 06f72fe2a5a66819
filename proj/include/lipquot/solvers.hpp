#pragma once

// Solvers built on the shared preimage engine:
//  * perturb_solve: successive approximation for f + g with f co-Lipschitz
//    and g a small Lipschitz perturbation;
//  * lift_curve: stepwise lifting of a Lipschitz curve through a map with
//    co-Lipschitz constant c (each step stays in a ball of radius c/m);
//  * level_set: all preimages of a point inside a box, via grid screening
//    and local refinement.

#include "lipquot/preimage.hpp"
#include "lipquot/quotient_zoo.hpp"

#include <algorithm>
#include <vector>

namespace lipquot {

struct Polyline {
  std::vector<double> times;
  std::vector<Vector> points;
  double lip_bound = 0.0;

  std::size_t size() const { return times.size(); }

  void check() const {
    if (times.size() != points.size() || times.empty())
      throw UsageError("polyline: times and points must be non-empty and of equal length");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw UsageError("polyline: times must be strictly increasing");
  }

  /// Piecewise-linear evaluation, clamped to the time range.
  Vector at(double t) const {
    if (t <= times.front()) return points.front();
    if (t >= times.back()) return points.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
    const double w = (t - times[i]) / (times[i + 1] - times[i]);
    return (1.0 - w) * points[i] + w * points[i + 1];
  }

  /// Largest segment slope in the given norm.
  double measured_lip(const Norm& norm) const {
    double best = 0.0;
    for (std::size_t i = 1; i < times.size(); ++i)
      best = std::max(best, norm(points[i] - points[i - 1]) / (times[i] - times[i - 1]));
    return best;
  }
};

// ---------------------------------------------------------------------------

struct PerturbOptions {
  double tol = 1e-8;
  int max_stages = 200;
  PreimageOptions solver{};
};

struct PerturbStage {
  double radius = 0.0;    // ball radius handed to the preimage solver
  double step = 0.0;      // ||z_n||
  double residual = 0.0;  // ||(f+g)(x + z_1 + ... + z_n) - y|| after the stage
};

struct PerturbResult {
  Vector z;
  double residual = 0.0;
  double delta = 0.0;  // co-Lip(f) * Lip(g)
  double r = 0.0;      // ||y - (f+g)(x)||
  double bound = 0.0;  // co-Lip(f) r / (1 - delta)
  std::vector<PerturbStage> stages;
};

/// Solves (f+g)(x+z) = y. Stage n finds z_n with
/// f(x + z_1 + ... + z_n) = y - g(x + z_1 + ... + z_{n-1}) inside the ball of
/// radius c r delta^{n-1} around the current point.
inline PerturbResult perturb_solve(const MapView& f, double co_lip, const MapView& g, const Vector& x,
                                   const Vector& y, const PerturbOptions& opt = {}) {
  require(co_lip > 0.0 && std::isfinite(co_lip), "perturb_solve: co-Lipschitz constant must be positive");
  require(std::isfinite(g.lip_bound), "perturb_solve: g needs a Lipschitz bound");
  if (f.in_dim != g.in_dim || f.out_dim != g.out_dim) throw UsageError("perturb_solve: f and g dimensions differ");
  if (x.size() != f.in_dim || y.size() != f.out_dim) throw UsageError("perturb_solve: x or y has the wrong dimension");
  PerturbResult out;
  out.delta = co_lip * g.lip_bound;
  if (out.delta >= 1.0)
    throw UsageError("perturb_solve: contraction violated, co-Lip(f) * Lip(g) = " + std::to_string(out.delta) +
                     " >= 1");
  auto total = [&](const Vector& p) { return Vector(f(p) + g(p)); };
  out.r = f.codomain_norm(y - total(x));
  out.bound = co_lip * out.r / (1.0 - out.delta);
  Vector prev = x, cur = x;
  Vector gprev = g(x);
  double residual = out.r;
  double radius = co_lip * out.r;
  PreimageOptions sopt = opt.solver;
  sopt.tol = std::min(sopt.tol, 0.1 * opt.tol);
  for (int n = 1; residual > opt.tol; ++n) {
    if (n > opt.max_stages)
      throw NumericalFailure("perturb_solve: no convergence after " + std::to_string(opt.max_stages) + " stages");
    const Vector target = y - gprev;
    sopt.seed = derive_seed(opt.solver.seed, "perturb_stage", static_cast<std::uint64_t>(n));
    // allow for the previous stage's residual, which the contraction argument does not see
    const double ball = radius * (1.0 + 1e-9) + co_lip * sopt.tol;
    const PreimageResult pre = solve_preimage_in_ball(f, target, cur, ball, sopt);
    if (!pre.converged)
      throw NumericalFailure("perturb_solve: preimage sub-solve failed at stage " + std::to_string(n) +
                             " (residual " + std::to_string(pre.residual) + ")");
    prev = cur;
    cur = pre.point;
    const Vector gcur = g(cur);
    PerturbStage st;
    st.radius = radius;
    st.step = f.domain_norm(cur - prev);
    residual = f.codomain_norm(y - total(cur));
    st.residual = residual;
    out.stages.push_back(st);
    radius = co_lip * f.codomain_norm(gcur - gprev);
    radius = std::min(radius, out.delta * st.radius);
    gprev = gcur;
  }
  out.z = cur - x;
  out.residual = residual;
  if (f.domain_norm(out.z) > out.bound * (1.0 + 1e-6) + 10.0 * opt.tol)
    throw NumericalFailure("perturb_solve: solution norm exceeds c r / (1 - delta)");
  return out;
}

// ---------------------------------------------------------------------------

struct LiftOptions {
  double co_lip = 1.0;
  double tol_factor = 1e-6;  // mesh-point residual <= tol_factor * mesh
  PreimageOptions solver{};
};

/// Lifts xi (times mapped onto m equal steps of its time range) starting at x0.
inline Polyline lift_curve(const MapView& map, const Vector& x0, const Polyline& xi, int m, const LiftOptions& opt = {}) {
  xi.check();
  require(m >= 1, "lift_curve: m must be >= 1");
  if (x0.size() != map.in_dim) throw UsageError("lift_curve: x0 has the wrong dimension");
  const double start_gap = map.codomain_norm(map(x0) - xi.points.front());
  if (start_gap > 1e-8) throw UsageError("lift_curve: T(x0) differs from xi(0) by " + std::to_string(start_gap));
  const double xi_lip = xi.measured_lip(map.codomain_norm);
  if (xi_lip > 1.0 + 1e-9) throw UsageError("lift_curve: xi must be 1-Lipschitz");
  const double t0 = xi.times.front(), t1 = xi.times.back();
  const double h = (t1 - t0) / m;
  Polyline out;
  out.times.push_back(t0);
  out.points.push_back(x0);
  PreimageOptions sopt = opt.solver;
  sopt.tol = opt.tol_factor * h;
  for (int k = 0; k < m; ++k) {
    const double t = k + 1 == m ? t1 : t0 + (k + 1) * h;
    const Vector target = xi.at(t);
    const Vector& cur = out.points.back();
    std::vector<Vector> warm;
    if (out.points.size() >= 2) warm.push_back(cur + (cur - out.points[out.points.size() - 2]));
    sopt.seed = derive_seed(opt.solver.seed, "lift_step", static_cast<std::uint64_t>(k));
    // the current point only hits xi(t_k) up to the step tolerance
    const double radius = opt.co_lip * (h + sopt.tol);
    const PreimageResult pre = solve_preimage_in_ball(map, target, cur, radius, sopt, warm);
    if (!pre.converged)
      throw NumericalFailure("lift_curve: step " + std::to_string(k) + " failed (best residual " +
                             std::to_string(pre.residual) + ")");
    out.times.push_back(t);
    out.points.push_back(pre.point);
  }
  out.lip_bound = opt.co_lip * (1.0 + 1e-3);
  const double measured = out.measured_lip(map.domain_norm);
  if (measured > out.lip_bound)
    throw NumericalFailure("lift_curve: computed steps exceed the Lipschitz bound (" + std::to_string(measured) + ")");
  return out;
}

inline Polyline lift_curve(const ZooMapSpec& spec, const Vector& x0, const Polyline& xi, int m,
                           const LiftOptions& opt = {}) {
  return lift_curve(zoo_view(spec), x0, xi, m, opt);
}

// ---------------------------------------------------------------------------

struct LevelSetReport {
  Vector target;
  std::vector<Vector> points;
  std::vector<double> residuals;
  double min_pair_gap = kInf;
  double grid_mesh = 0.0;
  long long grid_points = 0;
  int candidates = 0;
};

struct LevelSetOptions {
  PreimageOptions solver{};
};

inline LevelSetReport level_set(const MapView& map, const Vector& y, const Vector& lo, const Vector& hi, double mesh,
                                double tol = 1e-10, const LevelSetOptions& opt = {}) {
  require(mesh > 0.0, "level_set: mesh must be positive");
  const int d = map.in_dim;
  if (d > 4) throw UsageError("level_set: domain dimension must be <= 4");
  if (lo.size() != d || hi.size() != d || y.size() != map.out_dim)
    throw UsageError("level_set: box or target dimension mismatch");
  for (int i = 0; i < d; ++i)
    if (!(hi[i] > lo[i])) throw UsageError("level_set: box must have hi > lo");
  require(std::isfinite(map.lip_bound), "level_set: map needs a Lipschitz bound for screening");

  std::vector<long long> counts(d);
  long long total = 1;
  for (int i = 0; i < d; ++i) {
    counts[i] = static_cast<long long>(std::floor((hi[i] - lo[i]) / mesh + 1e-9)) + 1;
    total *= counts[i];
  }
  require(total <= 50'000'000, "level_set: grid too large");
  auto point_of = [&](long long flat) {
    Vector p(d);
    for (int i = 0; i < d; ++i) {
      p[i] = lo[i] + mesh * static_cast<double>(flat % counts[i]);
      flat /= counts[i];
    }
    return p;
  };

  std::vector<double> res(static_cast<std::size_t>(total));
  parallel_for(res.size(), [&](std::size_t i) {
    res[i] = map.codomain_norm(map(point_of(static_cast<long long>(i))) - y);
  });

  // screened grid points that are local minima over their 3^d neighbourhood
  const double threshold = mesh * map.lip_bound + tol;
  std::vector<long long> cands;
  std::vector<long long> idx(d);
  for (long long flat = 0; flat < total; ++flat) {
    if (res[flat] > threshold) continue;
    long long rem = flat;
    for (int i = 0; i < d; ++i) {
      idx[i] = rem % counts[i];
      rem /= counts[i];
    }
    bool is_min = true;
    std::vector<int> off(d, -1);
    while (is_min) {
      long long nb = 0, stride = 1;
      bool inside = true, self = true;
      for (int i = 0; i < d; ++i) {
        const long long c = idx[i] + off[i];
        if (c < 0 || c >= counts[i]) inside = false;
        if (off[i] != 0) self = false;
        nb += c * stride;
        stride *= counts[i];
      }
      if (inside && !self && res[nb] < res[flat]) is_min = false;
      int i = 0;
      while (i < d && off[i] == 1) off[i++] = -1;
      if (i == d) break;
      ++off[i];
    }
    if (is_min) cands.push_back(flat);
  }

  LevelSetReport rep;
  rep.target = y;
  rep.grid_mesh = mesh;
  rep.grid_points = total;
  rep.candidates = static_cast<int>(cands.size());
  std::vector<PreimageResult> refined(cands.size());
  const Retraction box = box_retraction(lo, hi);
  parallel_for(cands.size(), [&](std::size_t c) {
    PreimageOptions sopt = opt.solver;
    sopt.tol = tol;
    refined[c] = descend(map, y, point_of(cands[c]), box, sopt);
  });
  for (const auto& r : refined) {
    if (!r.converged) continue;
    bool dup = false;
    for (const auto& q : rep.points)
      if (map.domain_norm(q - r.point) <= 2.0 * mesh) {
        dup = true;
        break;
      }
    if (dup) continue;
    rep.points.push_back(r.point);
    rep.residuals.push_back(r.residual);
  }
  for (std::size_t i = 0; i < rep.points.size(); ++i)
    for (std::size_t j = i + 1; j < rep.points.size(); ++j)
      rep.min_pair_gap = std::min(rep.min_pair_gap, map.domain_norm(rep.points[i] - rep.points[j]));
  return rep;
}

inline LevelSetReport level_set(const ZooMapSpec& spec, const Vector& y, const Vector& lo, const Vector& hi,
                                double mesh, double tol = 1e-10, const LevelSetOptions& opt = {}) {
  return level_set(zoo_view(spec), y, lo, hi, mesh, tol, opt);
}

}  // namespace lipquot
