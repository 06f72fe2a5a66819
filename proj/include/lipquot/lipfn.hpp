#pragma once

// Lipschitz maps on balls, the scale-restricted quantity
//   Lip(f; t) = sup_{||x - y|| >= t} ||f(x) - f(y)|| / ||x - y||
// and large-distance Lipschitz / co-Lipschitz constants.
//
// Estimation works from one t-independent pool of seeded pairs. Pairs are
// drawn in fixed-size blocks; every complete block hands its best pair per
// distance octave to a coordinate hill climber that never shortens the pair.
// Lip(f; t) is then the maximum ratio over pooled pairs at distance >= t, so
// the estimate is exactly nonincreasing in t and nondecreasing in the budget.

#include "lipquot/preimage.hpp"
#include "lipquot/space.hpp"

#include <optional>
#include <vector>

namespace lipquot {

struct Ball {
  Vector center;
  double radius = 1.0;
};

class LipschitzFunction {
 public:
  using Evaluator = std::function<Vector(const Vector&)>;

  LipschitzFunction(Evaluator f, int out_dim, Ball domain, std::optional<double> declared_lip = std::nullopt)
      : f_(std::move(f)), out_dim_(out_dim), domain_(std::move(domain)), declared_(declared_lip),
        codomain_(NormedSpace::euclidean(out_dim)) {
    require(out_dim >= 1, "output dimension must be >= 1");
    require(domain_.radius > 0.0, "domain radius must be positive");
  }

  static LipschitzFunction scalar(std::function<double(const Vector&)> f, Ball domain,
                                  std::optional<double> declared_lip = std::nullopt) {
    return {[f = std::move(f)](const Vector& x) {
              Vector v(1);
              v[0] = f(x);
              return v;
            },
            1, std::move(domain), declared_lip};
  }

  Vector operator()(const Vector& x) const { return f_(x); }
  double value(const Vector& x) const { return f_(x)[0]; }

  int in_dim() const { return static_cast<int>(domain_.center.size()); }
  int out_dim() const { return out_dim_; }
  const Ball& domain() const { return domain_; }
  std::optional<double> declared_lip() const { return declared_; }
  const NormedSpace& codomain() const { return codomain_; }
  const Evaluator& evaluator() const { return f_; }

  LipschitzFunction& with_codomain(NormedSpace s) {
    require(s.dim() == out_dim_, "codomain dimension mismatch");
    codomain_ = std::move(s);
    return *this;
  }

  MapView view(const NormedSpace& space) const {
    MapView m;
    m.in_dim = in_dim();
    m.out_dim = out_dim_;
    m.eval = f_;
    m.domain_norm = norm_fn(space);
    m.codomain_norm = norm_fn(codomain_);
    m.lip_bound = declared_.value_or(kInf);
    return m;
  }

 private:
  Evaluator f_;
  int out_dim_;
  Ball domain_;
  std::optional<double> declared_;
  NormedSpace codomain_;
};

struct PairSample {
  Vector x;
  Vector y;
  double dist = 0.0;
  double ratio = 0.0;
  double delta = 0.0;  // ||f(x) - f(y)||
};

struct PairPoolOptions {
  int block_size = 256;
  int refine_steps = 50;
  int octaves = 20;
};

namespace detail {

/// Largest h >= 0 with m + h u still in the ball (m inside, u != 0).
inline double ray_exit(const NormedSpace& space, const Ball& ball, const Vector& m, const Vector& u) {
  if (space.p() == 2.0 && space.is_plain()) {
    const Vector d = m - ball.center;
    const double a = u.squaredNorm(), b = d.dot(u), c = d.squaredNorm() - ball.radius * ball.radius;
    const double disc = std::max(0.0, b * b - a * c);
    return std::max(0.0, (-b + std::sqrt(disc)) / a);
  }
  double lo = 0.0, hi = 4.0 * ball.radius / space.norm(u);
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (space.norm(m + mid * u - ball.center) <= ball.radius)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

inline bool lex_less(const Vector& a, const Vector& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

/// Strictly better pair: larger ratio, ties to the lexicographically smaller midpoint.
inline bool better_pair(const PairSample& a, const PairSample& b) {
  if (a.ratio != b.ratio) return a.ratio > b.ratio;
  return lex_less(a.x + a.y, b.x + b.y);
}

}  // namespace detail

class PairPool {
 public:
  PairPool(const LipschitzFunction& f, const NormedSpace& space, int budget, std::uint64_t seed,
           const PairPoolOptions& opt = {})
      : space_(space) {
    require(budget >= 1, "pair budget must be >= 1");
    space.check_dim(f.domain().center);
    const int bs = opt.block_size;
    const int blocks = (budget + bs - 1) / bs;
    std::vector<std::vector<PairSample>> per_block(blocks);
    parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
      const int count = std::min(bs, budget - static_cast<int>(b) * bs);
      per_block[b] = run_block(f, space, count, count == bs, seed, b, opt);
    });
    for (auto& blk : per_block)
      for (auto& s : blk) pairs_.push_back(std::move(s));
    index();
  }

  /// Best pair at distance >= t (relative tolerance 1e-12 on the distance).
  std::optional<PairSample> best(double t) const {
    const double need = t * (1.0 - 1e-12);
    // order_ is sorted by distance descending; prefix_best_ is the running best
    auto it = std::partition_point(order_.begin(), order_.end(),
                                   [&](std::size_t i) { return pairs_[i].dist >= need; });
    const std::size_t n = static_cast<std::size_t>(it - order_.begin());
    if (n == 0) return std::nullopt;
    return pairs_[prefix_best_[n - 1]];
  }

  double estimate(double t) const {
    const auto b = best(t);
    if (!b) throw UsageError("lip_at_scale: no sampled pair at distance >= t (t too large for the domain)");
    return b->ratio;
  }

  const std::vector<PairSample>& pairs() const { return pairs_; }

 private:
  static PairSample make_pair(const LipschitzFunction& f, const NormedSpace& space, Vector x, Vector y,
                              Vector* fx_out = nullptr, Vector* fy_out = nullptr) {
    PairSample s;
    const Vector fx = f(x), fy = f(y);
    s.dist = space.norm(x - y);
    s.delta = lp_norm(fx - fy, f.codomain().p());
    s.ratio = s.dist > 0.0 ? s.delta / s.dist : 0.0;
    s.x = std::move(x);
    s.y = std::move(y);
    if (fx_out) *fx_out = fx;
    if (fy_out) *fy_out = fy;
    return s;
  }

  static Vector unit_direction(const NormedSpace& space, Rng& rng) {
    Vector u = rng.normal_vector(space.dim());
    double n = space.norm(u);
    while (n == 0.0) {
      u = rng.normal_vector(space.dim());
      n = space.norm(u);
    }
    return u / n;
  }

  static PairSample draw(const LipschitzFunction& f, const NormedSpace& space, Rng& rng, int kind) {
    const Ball& ball = f.domain();
    const Norm norm = norm_fn(space);
    switch (kind) {
      case 0: {  // two independent points
        Vector x = sample_ball(norm, ball.center, ball.radius, rng);
        Vector y = sample_ball(norm, ball.center, ball.radius, rng);
        return make_pair(f, space, std::move(x), std::move(y));
      }
      case 1: {  // two points on a random chord
        const Vector m = sample_ball(norm, ball.center, ball.radius, rng);
        const Vector u = unit_direction(space, rng);
        const double hp = detail::ray_exit(space, ball, m, u);
        const double hm = detail::ray_exit(space, ball, m, -u);
        const double s1 = rng.uniform(-hm, hp), s2 = rng.uniform(-hm, hp);
        return make_pair(f, space, m + s1 * u, m + s2 * u);
      }
      case 2: {  // short pair at a log-uniform distance
        Vector x = sample_ball(norm, ball.center, ball.radius, rng);
        const double len = ball.radius * std::pow(10.0, -rng.uniform(0.0, 4.0));
        Vector y = x + len * unit_direction(space, rng);
        y = ball_retraction(norm, ball.center, ball.radius)(y);
        return make_pair(f, space, std::move(x), std::move(y));
      }
      default: {  // diameter
        const Vector u = unit_direction(space, rng);
        return make_pair(f, space, ball.center - ball.radius * u, ball.center + ball.radius * u);
      }
    }
  }

  /// Coordinate hill climbing on (x, y) keeping both in the ball and the
  /// distance at least the starting distance.
  static PairSample refine(const LipschitzFunction& f, const NormedSpace& space, PairSample s, int steps) {
    const Ball& ball = f.domain();
    const double floor_dist = s.dist;
    const int n = space.dim();
    Vector fx = f(s.x), fy = f(s.y);
    double h = std::min(0.25 * floor_dist, 0.25 * ball.radius);
    if (h <= 0.0) return s;
    const double q = f.codomain().p();
    auto inside = [&](const Vector& p) { return space.norm(p - ball.center) <= ball.radius; };
    for (int step = 0; step < steps; ++step) {
      bool moved = false;
      for (int c = 0; c < 2 * n; ++c) {
        const bool on_x = c < n;
        const int i = c % n;
        for (double sign : {1.0, -1.0}) {
          Vector p = on_x ? s.x : s.y;
          p[i] += sign * h;
          if (!inside(p)) continue;
          const double dist = on_x ? space.norm(p - s.y) : space.norm(s.x - p);
          if (dist < floor_dist || dist == 0.0) continue;
          const Vector fp = f(p);
          const double delta = lp_norm(on_x ? Vector(fp - fy) : Vector(fx - fp), q);
          const double ratio = delta / dist;
          if (ratio > s.ratio) {
            (on_x ? s.x : s.y) = p;
            (on_x ? fx : fy) = fp;
            s.dist = dist;
            s.delta = delta;
            s.ratio = ratio;
            moved = true;
            break;
          }
        }
      }
      if (!moved) h *= 0.5;
    }
    return s;
  }

  static std::vector<PairSample> run_block(const LipschitzFunction& f, const NormedSpace& space, int count,
                                           bool complete, std::uint64_t seed, std::size_t block,
                                           const PairPoolOptions& opt) {
    Rng rng(seed, "lip_pairs", block);
    std::vector<PairSample> out;
    out.reserve(count + opt.octaves);
    for (int i = 0; i < count; ++i) out.push_back(draw(f, space, rng, i % 4));
    if (!complete) return out;
    const double diam = 2.0 * f.domain().radius;
    std::vector<int> champion(opt.octaves, -1);
    for (int i = 0; i < count; ++i) {
      const PairSample& s = out[i];
      if (s.dist <= 0.0) continue;
      const int oct = std::clamp(static_cast<int>(std::floor(std::log2(diam / s.dist))), 0, opt.octaves - 1);
      if (champion[oct] < 0 || detail::better_pair(s, out[champion[oct]])) champion[oct] = i;
    }
    for (int c : champion)
      if (c >= 0) out.push_back(refine(f, space, out[c], opt.refine_steps));
    return out;
  }

  void index() {
    order_.resize(pairs_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return pairs_[a].dist > pairs_[b].dist; });
    prefix_best_.resize(order_.size());
    for (std::size_t k = 0; k < order_.size(); ++k) {
      const std::size_t cand = order_[k];
      prefix_best_[k] =
          (k == 0 || detail::better_pair(pairs_[cand], pairs_[prefix_best_[k - 1]])) ? cand : prefix_best_[k - 1];
    }
  }

  NormedSpace space_;
  std::vector<PairSample> pairs_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> prefix_best_;
};

/// Lower estimate of Lip(f; t); t = 0 gives the global Lipschitz estimate.
inline double lip_at_scale(const LipschitzFunction& f, const NormedSpace& space, double t, int budget,
                           std::uint64_t seed) {
  require(t >= 0.0, "t must be nonnegative");
  require(t < 2.0 * f.domain().radius * (1.0 + 1e-12), "t must be below the domain diameter");
  return PairPool(f, space, budget, seed).estimate(t);
}

struct ScaleProfile {
  std::vector<double> scales;
  std::vector<double> estimates;
  int pair_budget = 0;
  std::uint64_t seed = 0;
};

inline ScaleProfile scale_profile(const LipschitzFunction& f, const NormedSpace& space,
                                  const std::vector<double>& scales, int budget, std::uint64_t seed) {
  const PairPool pool(f, space, budget, seed);
  ScaleProfile prof{scales, {}, budget, seed};
  for (double t : scales) prof.estimates.push_back(pool.estimate(t));
  return prof;
}

struct LargeDistanceConstants {
  double c_up = 0.0;
  double c_down = kInf;  // infinity encodes "unbounded"
};

struct LargeDistanceOptions {
  int centers = 4;
  int scales = 3;
  int cover_targets = 16;
};

/// Constants C with f B_e(x) in B_{C e}(f x) and f B_e(x) containing
/// B_{e/C}(f x) for sampled x and e >= eps0.
inline LargeDistanceConstants large_distance_constants(const LipschitzFunction& f, const NormedSpace& space,
                                                       double eps0, int budget, std::uint64_t seed,
                                                       const LargeDistanceOptions& opt = {}) {
  const Ball& ball = f.domain();
  require(eps0 > 0.0 && eps0 < ball.radius, "eps0 must lie in (0, domain radius)");
  LargeDistanceConstants out;
  const PairPool pool(f, space, budget, seed);
  for (const auto& s : pool.pairs()) out.c_up = std::max(out.c_up, s.delta / std::max(eps0, s.dist));

  const MapView view = f.view(space);
  Rng rng(seed, "large_distance_centers");
  double worst = 0.0;
  for (int j = 0; j < opt.scales; ++j) {
    const double e = eps0 * std::ldexp(1.0, j);
    if (e >= ball.radius) break;
    for (int c = 0; c < opt.centers; ++c) {
      const Vector x = c == 0 ? ball.center : sample_ball(view.domain_norm, ball.center, ball.radius - e, rng);
      CoverOptions copt;
      copt.solver.starts = 8;
      copt.solver.iterations = 200;
      const auto rep = cover_check(view, x, e, e, opt.cover_targets, derive_seed(seed, "large_distance_cover", j),
                                   CoverMode::bisect, copt);
      const double rho = rep.covered_radius_estimate.value_or(0.0);
      if (rho <= 0.0) return {out.c_up, kInf};
      worst = std::max(worst, e / rho);
    }
  }
  out.c_down = worst > 0.0 ? worst : kInf;
  return out;
}

}  // namespace lipquot
