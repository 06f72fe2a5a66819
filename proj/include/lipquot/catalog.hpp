#pragma once

// Named example functions, maps, curves and trees shared by the CLI and the
// acceptance checks.

#include "lipquot/counterexamples.hpp"
#include "lipquot/lipfn.hpp"
#include "lipquot/martingale.hpp"
#include "lipquot/quotient_zoo.hpp"
#include "lipquot/solvers.hpp"

#include <string>
#include <vector>

namespace lipquot {

inline double sawtooth(double t) {
  const double n = std::floor(t);
  const double sign = std::fmod(std::abs(n), 2.0) == 0.0 ? 1.0 : -1.0;
  return sign * (1.0 - 2.0 * (t - n));
}

/// Seeded 1-Lipschitz function on l_p^dim: a convex combination of kinked
/// ridges |<a,x> - b|, distances ||x - c||_p and sines sin(<a,x> + b), with
/// ||a||_q = 1 for the dual exponent q.
inline LipschitzFunction ridge_function(int dim, double p, std::uint64_t seed, Ball domain, int terms = 4) {
  require(dim >= 1 && terms >= 1, "ridge_function: dim and terms must be >= 1");
  Rng rng(seed, "ridge_function");
  const double q = dual_exponent(p);
  struct Term {
    int kind;
    Vector a;
    double b;
    double w;
  };
  std::vector<Term> ts;
  double total = 0.0;
  for (int i = 0; i < terms; ++i) {
    Vector a = rng.normal_vector(dim);
    a /= lp_norm(a, q);
    const Vector c = domain.center + domain.radius * rng.uniform(-1.0, 1.0) * a;
    const double w = rng.uniform(0.2, 1.0);
    const int kind = static_cast<int>(rng.index(3));
    const double b = kind == 0 ? a.dot(c) : rng.uniform(-3.0, 3.0);
    ts.push_back({kind, kind == 1 ? c : a, b, w});
    total += w;
  }
  for (auto& t : ts) t.w /= total;
  return LipschitzFunction::scalar(
      [ts, p](const Vector& x) {
        double s = 0.0;
        for (const auto& t : ts) {
          if (t.kind == 0) s += t.w * std::abs(t.a.dot(x) - t.b);
          else if (t.kind == 1) s += t.w * lp_norm(x - t.a, p);
          else s += t.w * std::sin(t.a.dot(x) + t.b);
        }
        return s;
      },
      std::move(domain), 1.0);
}

inline MapView identity_view(int n) { return linear_view(Matrix::Identity(n, n), "identity"); }

/// amp * sin applied coordinatewise; Lipschitz constant |amp| in every l_p.
inline MapView sine_view(int n, double amp) {
  MapView g;
  g.in_dim = g.out_dim = n;
  g.eval = [amp](const Vector& x) { return Vector(amp * x.array().sin().matrix()); };
  g.lip_bound = std::abs(amp);
  g.name = "sine";
  return g;
}

/// Unit circle arc t -> (cos t, sin t), t in [0, length], unit speed.
inline Polyline circle_arc(int pieces, double length) {
  require(pieces >= 1 && length > 0.0, "circle_arc: need pieces >= 1 and positive length");
  Polyline p;
  for (int i = 0; i <= pieces; ++i) {
    const double t = length * i / pieces;
    p.times.push_back(t);
    Vector v(2);
    v << std::cos(t), std::sin(t);
    p.points.push_back(v);
  }
  p.lip_bound = 1.0;
  return p;
}

/// Segment from a to b at unit speed in the given l_p norm.
inline Polyline segment_curve(const Vector& a, const Vector& b, double p = 2.0) {
  require(a.size() == b.size(), "segment_curve: endpoint dimension mismatch");
  const double len = lp_norm(b - a, p);
  require(len > 0.0, "segment_curve: endpoints coincide");
  Polyline c;
  c.times = {0.0, len};
  c.points = {a, b};
  c.lip_bound = 1.0;
  return c;
}

/// Root 0 split once at 1/2 into +1 and -1.
inline PartitionMartingale rademacher_martingale() {
  PartitionMartingale m(Vector::Zero(1));
  m.split(0, 0.5, Vector::Constant(1, 1.0), Vector::Constant(1, -1.0));
  return m;
}

/// Staircase curve with n steps reparametrized onto [0,1]; unit speed in l_1^n.
inline Polyline staircase_polyline(int n) {
  require(n >= 1, "staircase_polyline: n must be >= 1");
  Polyline p;
  for (int i = 0; i <= n; ++i) {
    p.times.push_back(static_cast<double>(i) / n);
    p.points.push_back(staircase_point(n, i) / n);
  }
  p.lip_bound = 1.0;
  return p;
}

/// Random instance for the l_p cut-off map: coordinates decaying like
/// 0.5 N(0,1) 2^{-k} and a target moved by |b_n| in [0.05, 0.5] per slot.
inline std::pair<Vector, Vector> prop311_random_instance(const ZooMapSpec& spec, Rng& rng) {
  require(spec.kind == ZooKind::prop311, "prop311_random_instance: spec must be the cut-off map");
  const int n = spec.prop311.n, m = spec.prop311.m;
  Vector x(n * m);
  for (int j = 0; j < n * m; ++j) x[j] = 0.5 * rng.normal() * std::ldexp(1.0, -(j % m));
  Vector y = zoo_eval(spec, x);
  for (int i = 0; i < n; ++i) y[i] += rng.uniform(0.05, 0.5) * (rng.uniform() < 0.5 ? -1 : 1);
  return {x, y};
}

}  // namespace lipquot
