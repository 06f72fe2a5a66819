#pragma once

// Constructive uniform approximation by affine maps on uniformly smooth l_p
// balls (scalar search plus the coordinate-by-coordinate vector extension).
//
// Scalar search, after normalizing to a 1-Lipschitz g on the unit ball:
//   (a) if g stays within 2 eps of g(0), the constant map on the whole ball;
//   (b) otherwise find a scale d with  Lip(g; d/2) < (1 + delta eps) Lip(g; 2d),
//       take a near-extremal pair u, v at distance 2d, and approximate g on
//       B_{delta d / 2} around (u + v)/2 by  (g(u)+g(v))/2 + L <z*, w - c>,
//       with error at most 3 eps delta d = 6 eps r1.

#include "lipquot/affine_oracle.hpp"
#include "lipquot/lipfn.hpp"

#include <optional>
#include <vector>

namespace lipquot {

struct UaapOptions {
  int pair_budget = 4000;
  int validation_samples = 4000;
  int fit_samples = 1000;
  double slack = 1.1;       // allowed factor on the claimed bound during validation
  double scan_slack = 1.0;  // factor applied to the small-scale estimate in the scale test
  int max_candidates = 8;   // scale hits tried before giving up on validation
  bool polish = true;       // replace the construction map by the sample minimax map when better
  int vector_rounds = 4;
  std::uint64_t seed = 0;
  SmoothnessOptions smoothness{};
};

struct ScanStep {
  double d = 0.0;
  double lip_half = 0.0;    // estimate of Lip(g; d/2)
  double lip_double = 0.0;  // estimate of Lip(g; 2d)
  bool satisfied = false;
};

struct ApproxCertificate {
  Ball ball;
  AffineMap map;               // returned approximant
  AffineMap construction_map;  // the map the proof builds
  double eps = 0.0;
  double d = 0.0;
  int k = 0;
  double delta = 0.0;
  double L = 0.0;
  std::optional<DualVector> z_star;
  double bound_claim = 0.0;
  double sampled_error = 0.0;       // error of `map` on the validation samples
  double construction_error = 0.0;  // error of `construction_map` on the same samples
  double radius_floor = 0.0;
  bool constant_branch = false;
  bool polished = false;
  std::vector<ScanStep> trace;
  std::vector<ApproxCertificate> coordinates;  // vector search: one per coordinate pass
};

class UaapValidationFailure : public VerificationFailure {
 public:
  UaapValidationFailure(const std::string& what, ApproxCertificate cert)
      : VerificationFailure(what), certificate(std::move(cert)) {}
  ApproxCertificate certificate;
};

/// k(eps, delta): smallest k with (1 + delta eps)^k eps > 1.
inline int uaap_k(double eps, double delta) {
  int k = static_cast<int>(std::floor(std::log(1.0 / eps) / std::log1p(delta * eps)));
  k = std::max(k, 0);
  while (std::pow(1.0 + delta * eps, k) * eps > 1.0 && k > 0) --k;
  while (std::pow(1.0 + delta * eps, k) * eps <= 1.0) ++k;
  return k;
}

/// Proof-derived lower bound (delta/2) 4^{-k} / 2 on r1 for the unit ball.
inline double uaap_radius_floor(double eps, double delta) {
  return 0.5 * delta * std::ldexp(1.0, -2 * uaap_k(eps, delta)) * 0.5;
}

namespace detail {

inline std::vector<Vector> ball_validation_points(const NormedSpace& space, const Vector& center, double radius,
                                                  int count, std::uint64_t seed, std::string_view stream) {
  Rng rng(seed, stream);
  const Norm norm = lp_norm_fn(space.p());
  std::vector<Vector> pts{center};
  for (int i = 0; i < space.dim(); ++i) {
    for (double s : {1.0, -1.0}) {
      Vector e = center;
      e[i] += s * radius;
      pts.push_back(e);
    }
  }
  while (static_cast<int>(pts.size()) < count) {
    if (pts.size() % 2 == 0) {
      pts.push_back(sample_ball(norm, center, radius, rng));
    } else {
      Vector g = rng.normal_vector(space.dim());
      pts.push_back(center + g * (radius / space.norm(g)));
    }
  }
  return pts;
}

inline double scalar_error(const LipschitzFunction& g, const AffineMap& a, const std::vector<Vector>& pts) {
  double worst = 0.0;
  for (const auto& w : pts) worst = std::max(worst, std::abs(g.value(w) - a.scalar(w)));
  return worst;
}

/// Search on a 1-Lipschitz g over the unit ball; all outputs in normalized units.
inline ApproxCertificate uaap_normalized(const NormedSpace& space, const LipschitzFunction& g, double eps,
                                         const UaapOptions& opt) {
  const int n = space.dim();
  ApproxCertificate cert;
  cert.eps = eps;
  cert.delta = smoothness_delta(space, eps, opt.smoothness);
  cert.k = uaap_k(eps, cert.delta);
  cert.radius_floor = uaap_radius_floor(eps, cert.delta);

  const auto whole = ball_validation_points(space, Vector::Zero(n), 1.0, opt.validation_samples, opt.seed,
                                            "uaap_whole_ball");
  const double g0 = g.value(Vector::Zero(n));
  double spread = 0.0;
  for (const auto& w : whole) spread = std::max(spread, std::abs(g.value(w) - g0));
  if (spread <= 2.0 * eps) {
    cert.constant_branch = true;
    cert.ball = {Vector::Zero(n), 1.0};
    cert.construction_map = AffineMap::constant(n, Vector::Constant(1, g0));
    cert.map = cert.construction_map;
    cert.bound_claim = 6.0 * eps;
    cert.construction_error = cert.sampled_error = spread;
    return cert;
  }

  const PairPool pool(g, space, opt.pair_budget, derive_seed(opt.seed, "uaap_pairs"));
  const double growth = 1.0 + cert.delta * eps;
  const double d_min = std::max(std::ldexp(1.0, -2 * cert.k) * 0.5, 1e-12);
  int candidates = 0;
  std::optional<UaapValidationFailure> last_failure;
  for (int j = 0;; ++j) {
    const double d = std::exp2(-0.25 * j);
    if (d < d_min) break;
    ScanStep step{d, pool.estimate(0.5 * d), 0.0, false};
    const auto pair = pool.best(2.0 * d);
    step.lip_double = pair ? pair->ratio : 0.0;
    step.satisfied = pair && step.lip_half * opt.scan_slack < growth * step.lip_double;
    cert.trace.push_back(step);
    if (!step.satisfied) continue;

    // the pair is at distance >= 2d; using its own half-distance keeps the scale test valid
    const double fx = g.value(pair->x), fy = g.value(pair->y);
    const Vector& u = fx >= fy ? pair->x : pair->y;
    const Vector& v = fx >= fy ? pair->y : pair->x;
    const double du = std::max(fx, fy), dv = std::min(fx, fy);
    const Vector c = 0.5 * (u + v);
    const Vector z = 0.5 * (u - v);
    const double dd = space.norm(z);
    ApproxCertificate cand = cert;
    cand.d = dd;
    cand.L = (du - dv) / (2.0 * dd);
    cand.z_star = duality_map(space, z / dd);
    const double r1 = 0.5 * cert.delta * dd;
    const double cn = space.norm(c);
    const Vector center = cn <= 1.0 - r1 ? c : Vector(c * ((1.0 - r1) / cn));
    cand.ball = {center, r1};
    Matrix lin = cand.L * cand.z_star->coords.transpose();
    Vector off = Vector::Constant(1, 0.5 * (du + dv) - cand.L * cand.z_star->coords.dot(c));
    cand.construction_map = AffineMap(lin, off);
    cand.bound_claim = 6.0 * eps * r1;

    const auto pts = ball_validation_points(space, center, r1, opt.validation_samples, opt.seed, "uaap_validate");
    cand.construction_error = scalar_error(g, cand.construction_map, pts);
    cand.map = cand.construction_map;
    cand.sampled_error = cand.construction_error;
    if (opt.polish) {
      const std::vector<Vector> fit_pts(pts.begin(), pts.begin() + std::min<std::size_t>(pts.size(), opt.fit_samples));
      std::vector<double> fs;
      for (const auto& w : fit_pts) fs.push_back(g.value(w));
      const FitResult fit = minimax_affine_fit(fit_pts, fs);
      const double fit_err = scalar_error(g, fit.map, pts);
      if (fit_err < cand.sampled_error) {
        cand.map = fit.map;
        cand.sampled_error = fit_err;
        cand.polished = true;
      }
    }
    if (cand.sampled_error <= cand.bound_claim * opt.slack) return cand;
    last_failure.emplace("uaap: sampled error " + std::to_string(cand.sampled_error) + " exceeds claim " +
                             std::to_string(cand.bound_claim),
                         cand);
    if (++candidates >= opt.max_candidates) break;
  }
  if (last_failure) throw *last_failure;
  throw NumericalFailure("uaap: no scale d on the grid satisfies Lip(f;d/2) < (1+delta eps) Lip(f;2d); scanned " +
                         std::to_string(cert.trace.size()) + " scales (estimation slack too tight?)");
}

/// Maps a certificate on the unit ball back to f on B_R(c0) with g = f(c0 + R u)/(R Lf).
inline ApproxCertificate denormalize(ApproxCertificate cert, const Vector& c0, double radius, double lf) {
  const double s = radius * lf;
  auto back = [&](const AffineMap& a) {
    const Matrix lin = a.linear * lf;
    return AffineMap(lin, a.offset * s - lin * c0);
  };
  cert.ball = {c0 + radius * cert.ball.center, radius * cert.ball.radius};
  cert.map = back(cert.map);
  cert.construction_map = back(cert.construction_map);
  cert.d *= radius;
  cert.L *= lf;
  cert.bound_claim *= s;
  cert.sampled_error *= s;
  cert.construction_error *= s;
  cert.radius_floor *= radius;
  for (auto& step : cert.trace) {
    step.d *= radius;
    step.lip_half *= lf;
    step.lip_double *= lf;
  }
  return cert;
}

inline LipschitzFunction normalized_scalar(const LipschitzFunction& f, int coord, double lf) {
  const Vector c0 = f.domain().center;
  const double radius = f.domain().radius;
  const auto eval = f.evaluator();
  return LipschitzFunction::scalar(
      [eval, c0, radius, lf, coord](const Vector& u) { return eval(c0 + radius * u)[coord] / (radius * lf); },
      {Vector::Zero(c0.size()), 1.0}, 1.0);
}

inline double lipschitz_scale(const LipschitzFunction& f, const NormedSpace& space, int coord,
                              const UaapOptions& opt) {
  if (f.declared_lip()) return *f.declared_lip();
  // estimate on the radius-normalized map so that rescaled problems see identical numbers
  const Vector c0 = f.domain().center;
  const double radius = f.domain().radius;
  const auto eval = f.evaluator();
  const auto h = LipschitzFunction::scalar(
      [eval, c0, radius, coord](const Vector& u) { return eval(c0 + radius * u)[coord] / radius; },
      {Vector::Zero(c0.size()), 1.0});
  const double est = lip_at_scale(h, space, 0.0, opt.pair_budget, derive_seed(opt.seed, "uaap_lip"));
  return est > 0.0 ? est * opt.slack : 1.0;
}

}  // namespace detail

/// Scalar search. f must be scalar valued; the declared Lipschitz bound is
/// used for normalization (estimated with slack when absent).
inline ApproxCertificate uaap_search_scalar(const NormedSpace& space, const LipschitzFunction& f, double eps,
                                            const UaapOptions& opt = {}) {
  require(f.out_dim() == 1, "uaap_search_scalar: f must be scalar valued");
  require(space.is_smooth(), "uaap_search_scalar: requires 1 < p < inf");
  require(eps > 0.0 && eps < 0.5, "uaap_search_scalar: eps must lie in (0, 1/2)");
  space.check_dim(f.domain().center);
  const double lf = detail::lipschitz_scale(f, space, 0, opt);
  require(lf > 0.0, "uaap_search_scalar: Lipschitz bound must be positive");
  const auto g = detail::normalized_scalar(f, 0, lf);
  try {
    return detail::denormalize(detail::uaap_normalized(space, g, eps, opt), f.domain().center, f.domain().radius, lf);
  } catch (const UaapValidationFailure& e) {
    throw UaapValidationFailure(e.what(), detail::denormalize(e.certificate, f.domain().center, f.domain().radius, lf));
  }
}

/// Vector search for F with values in l_inf^m. Coordinates are processed in
/// turn, each inside the ball returned for the previous one, at accuracy
/// eps/(6m) so that each coordinate is within eps r/m of its affine part.
/// Coordinates whose error on the final ball misses eps r_final / m are
/// refitted on that ball and, failing that, searched again inside it.
inline ApproxCertificate uaap_search_vector(const NormedSpace& space, const LipschitzFunction& f, double eps, int m,
                                            const UaapOptions& opt = {}) {
  require(m == f.out_dim(), "uaap_search_vector: m must equal the output dimension");
  require(eps > 0.0 && eps < 0.5, "uaap_search_vector: eps must lie in (0, 1/2)");
  space.check_dim(f.domain().center);
  const int n = space.dim();
  const double eps_coord = eps / (6.0 * m);
  Ball ball = f.domain();
  Matrix lin = Matrix::Zero(m, n);
  Vector off = Vector::Zero(m);
  ApproxCertificate out;
  out.eps = eps;
  out.radius_floor = f.domain().radius;

  std::vector<int> pending(m);
  for (int i = 0; i < m; ++i) pending[i] = i;
  const auto eval = f.evaluator();
  for (int round = 0; round < opt.vector_rounds && !pending.empty(); ++round) {
    for (int i : pending) {
      const auto coord = LipschitzFunction::scalar([eval, i](const Vector& x) { return eval(x)[i]; }, ball,
                                                   f.declared_lip());
      UaapOptions sub = opt;
      sub.seed = derive_seed(opt.seed, "uaap_coordinate", static_cast<std::uint64_t>(round * m + i));
      const auto cert = uaap_search_scalar(space, coord, eps_coord, sub);
      ball = cert.ball;
      lin.row(i) = cert.map.linear.row(0);
      off[i] = cert.map.offset[0];
      out.radius_floor *= cert.radius_floor / coord.domain().radius;
      out.coordinates.push_back(cert);
    }
    // check every coordinate on the final ball; refit misses on that ball
    const auto pts = detail::ball_validation_points(space, ball.center, ball.radius, opt.validation_samples,
                                                    derive_seed(opt.seed, "uaap_vector_round", round),
                                                    "uaap_validate");
    const double target = eps * ball.radius / m;
    std::vector<Vector> vals;
    for (const auto& w : pts) vals.push_back(eval(w));
    std::vector<int> failing;
    for (int i = 0; i < m; ++i) {
      double err = 0.0;
      for (std::size_t s = 0; s < pts.size(); ++s) err = std::max(err, std::abs(vals[s][i] - lin.row(i).dot(pts[s]) - off[i]));
      if (err <= target) continue;
      const std::size_t nfit = std::min<std::size_t>(pts.size(), opt.fit_samples);
      const std::vector<Vector> fit_pts(pts.begin(), pts.begin() + nfit);
      std::vector<double> fs;
      for (std::size_t s = 0; s < nfit; ++s) fs.push_back(vals[s][i]);
      const FitResult fit = minimax_affine_fit(fit_pts, fs);
      double ferr = 0.0;
      for (std::size_t s = 0; s < pts.size(); ++s) ferr = std::max(ferr, std::abs(vals[s][i] - fit.map.scalar(pts[s])));
      if (ferr <= target) {
        lin.row(i) = fit.map.linear.row(0);
        off[i] = fit.map.offset[0];
        out.polished = true;
      } else {
        failing.push_back(i);
      }
    }
    pending = failing;
  }

  out.ball = ball;
  out.map = AffineMap(lin, off);
  out.construction_map = out.map;
  out.bound_claim = eps * ball.radius;
  const auto pts = detail::ball_validation_points(space, ball.center, ball.radius, opt.validation_samples,
                                                  derive_seed(opt.seed, "uaap_vector_final"), "uaap_validate");
  double err = 0.0;
  for (const auto& w : pts) err = std::max(err, lp_norm(eval(w) - out.map(w), kInf));
  out.sampled_error = out.construction_error = err;
  if (!out.coordinates.empty()) {
    const auto& last = out.coordinates.back();
    out.d = last.d;
    out.k = last.k;
    out.delta = last.delta;
    out.L = last.L;
    out.z_star = last.z_star;
  }
  if (!pending.empty() || err > out.bound_claim * opt.slack)
    throw UaapValidationFailure("uaap_search_vector: coordinates still miss eps r/m after " +
                                    std::to_string(opt.vector_rounds) + " rounds",
                                out);
  return out;
}

}  // namespace lipquot
