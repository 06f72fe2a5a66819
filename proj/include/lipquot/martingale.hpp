#pragma once

// Generalized dyadic martingales on [0,1): a binary tree of half-open
// intervals [a,c), each optionally split at b into [a,b) and [b,c), with a
// vector value per node. A leaf keeps its value at all deeper levels.
// Lipschitz curves and such martingales correspond through
//   f(t) = int_0^t M(s) ds     and     children = difference quotients.

#include "lipquot/solvers.hpp"
#include "lipquot/space.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lipquot {

struct MartingaleNode {
  double a = 0.0;
  double c = 1.0;
  std::optional<double> b;  // split point of an internal node
  Vector value;
  int left = -1;
  int right = -1;
  int level = 0;

  bool is_leaf() const { return left < 0; }
  double width() const { return c - a; }
};

class PartitionMartingale {
 public:
  PartitionMartingale() = default;
  explicit PartitionMartingale(Vector root_value) {
    MartingaleNode r;
    r.value = std::move(root_value);
    nodes_.push_back(std::move(r));
  }

  /// Splits leaf `node` at b with the given child values; returns the left child's index.
  int split(int node, double b, Vector left_value, Vector right_value) {
    require(node >= 0 && node < static_cast<int>(nodes_.size()), "martingale: node index out of range");
    require(nodes_[node].is_leaf(), "martingale: node is already split");
    const double a = nodes_[node].a, c = nodes_[node].c;
    if (!(b > a && b < c)) throw UsageError("martingale: split point must lie strictly inside the atom");
    if (left_value.size() != dim() || right_value.size() != dim())
      throw UsageError("martingale: child value dimension mismatch");
    const int lvl = nodes_[node].level + 1;
    MartingaleNode l, r;
    l.a = a;
    l.c = b;
    l.value = std::move(left_value);
    l.level = lvl;
    r.a = b;
    r.c = c;
    r.value = std::move(right_value);
    r.level = lvl;
    nodes_.push_back(std::move(l));
    nodes_.push_back(std::move(r));
    const int li = static_cast<int>(nodes_.size()) - 2;
    nodes_[node].b = b;
    nodes_[node].left = li;
    nodes_[node].right = li + 1;
    return li;
  }

  /// Raw node access, used by deserialization; structure is checked by validate_martingale.
  std::vector<MartingaleNode>& mutable_nodes() { return nodes_; }
  const std::vector<MartingaleNode>& nodes() const { return nodes_; }
  const MartingaleNode& node(int i) const { return nodes_.at(i); }
  int dim() const { return nodes_.empty() ? 0 : static_cast<int>(nodes_.front().value.size()); }

  int depth() const {
    int d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.level);
    return d;
  }

  double bound(double p = 2.0) const {
    double m = 0.0;
    for (const auto& n : nodes_) m = std::max(m, lp_norm(n.value, p));
    return m;
  }

  /// Leaf indices in left-to-right order.
  std::vector<int> leaves() const {
    std::vector<int> out, stack;
    if (nodes_.empty()) return out;
    stack.push_back(0);
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      if (nodes_[i].is_leaf()) {
        out.push_back(i);
      } else {
        stack.push_back(nodes_[i].right);
        stack.push_back(nodes_[i].left);
      }
    }
    return out;
  }

  /// Chain of nested atoms containing x0, from the root down to a leaf.
  std::vector<int> chain(double x0) const {
    std::vector<int> out;
    if (nodes_.empty()) return out;
    int i = 0;
    while (true) {
      out.push_back(i);
      if (nodes_[i].is_leaf()) break;
      i = x0 < *nodes_[i].b ? nodes_[i].left : nodes_[i].right;
    }
    return out;
  }

 private:
  std::vector<MartingaleNode> nodes_;
};

// ---------------------------------------------------------------------------

struct MartingaleReport {
  bool is_martingale = false;
  bool is_bounded = false;
  bool is_separated = false;
  bool is_dyadic = false;  // every split at the midpoint
  double bound = 0.0;
  double max_identity_error = 0.0;
  double min_separation = kInf;  // over parent -> child edges
  int depth = 0;
  int nodes = 0;
};

namespace detail {

/// Structural checks: root [0,1), children exactly [a,b) and [b,c), levels consistent.
inline void check_structure(const PartitionMartingale& m) {
  const auto& ns = m.nodes();
  if (ns.empty()) throw UsageError("martingale: empty tree");
  if (ns[0].a != 0.0 || ns[0].c != 1.0) throw UsageError("martingale: malformed tree (root must be [0,1))");
  std::vector<int> parents(ns.size(), 0);
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const auto& n = ns[i];
    if (n.value.size() != m.dim()) throw UsageError("martingale: malformed tree (value dimension mismatch)");
    if ((n.left < 0) != (n.right < 0) || (n.left >= 0) != n.b.has_value())
      throw UsageError("martingale: malformed tree (node " + std::to_string(i) + " half split)");
    if (n.is_leaf()) continue;
    const int l = n.left, r = n.right;
    if (l >= static_cast<int>(ns.size()) || r >= static_cast<int>(ns.size()) || l <= static_cast<int>(i) ||
        r <= static_cast<int>(i))
      throw UsageError("martingale: malformed tree (child index out of range)");
    ++parents[l];
    ++parents[r];
    const double b = *n.b;
    if (!(b > n.a && b < n.c) || ns[l].a != n.a || ns[l].c != b || ns[r].a != b || ns[r].c != n.c)
      throw UsageError("martingale: malformed tree (overlap or gap below node " + std::to_string(i) + ")");
    if (ns[l].level != n.level + 1 || ns[r].level != n.level + 1)
      throw UsageError("martingale: malformed tree (inconsistent levels)");
  }
  for (std::size_t i = 1; i < ns.size(); ++i)
    if (parents[i] != 1) throw UsageError("martingale: malformed tree (node " + std::to_string(i) + " not reachable once)");
}

}  // namespace detail

inline MartingaleReport validate_martingale(const PartitionMartingale& m, double delta, double p = 2.0) {
  detail::check_structure(m);
  MartingaleReport rep;
  rep.nodes = static_cast<int>(m.nodes().size());
  rep.depth = m.depth();
  rep.bound = m.bound(p);
  rep.is_bounded = std::isfinite(rep.bound);
  rep.is_dyadic = true;
  for (const auto& n : m.nodes()) {
    if (n.is_leaf()) continue;
    const auto& l = m.node(n.left);
    const auto& r = m.node(n.right);
    const double b = *n.b;
    const Vector lhs = n.value * (n.c - n.a);
    const Vector rhs = l.value * (b - n.a) + r.value * (n.c - b);
    const double err = (lhs - rhs).cwiseAbs().maxCoeff();
    rep.max_identity_error = std::max(rep.max_identity_error, err);
    rep.min_separation = std::min(rep.min_separation, lp_norm(l.value - n.value, p));
    rep.min_separation = std::min(rep.min_separation, lp_norm(r.value - n.value, p));
    if (b != 0.5 * (n.a + n.c)) rep.is_dyadic = false;
  }
  rep.is_martingale = rep.max_identity_error <= 1e-12;
  rep.is_separated = rep.min_separation >= delta;
  return rep;
}

// ---------------------------------------------------------------------------

struct CurveFromMartingale {
  Polyline curve;
  double stabilization_error = 0.0;  // max over atoms |int_atom M_leaf - value * width|
  bool stabilized = false;
};

/// f(t) = int_0^t M, integrated over the deepest atoms (leaves).
inline CurveFromMartingale to_curve(const PartitionMartingale& m, double p = 2.0) {
  detail::check_structure(m);
  const int d = m.dim();
  CurveFromMartingale out;
  const auto leaves = m.leaves();
  std::vector<CompensatedSum> acc(d);
  out.curve.times.push_back(0.0);
  out.curve.points.push_back(Vector::Zero(d));
  for (int li : leaves) {
    const auto& n = m.node(li);
    Vector pt(d);
    for (int k = 0; k < d; ++k) {
      acc[k].add(n.value[k] * n.width());
      pt[k] = acc[k].value();
    }
    out.curve.times.push_back(n.c);
    out.curve.points.push_back(pt);
  }
  out.curve.lip_bound = m.bound(p);

  // every atom integrates to its own value times its width; children have
  // larger indices than their parents, so one reverse sweep suffices
  const auto& ns = m.nodes();
  std::vector<Vector> integral(ns.size());
  for (int i = static_cast<int>(ns.size()) - 1; i >= 0; --i) {
    if (ns[i].is_leaf())
      integral[i] = ns[i].value * ns[i].width();
    else
      integral[i] = integral[ns[i].left] + integral[ns[i].right];
  }
  for (std::size_t i = 0; i < ns.size(); ++i)
    out.stabilization_error = std::max(out.stabilization_error,
                                       (integral[i] - ns[i].value * ns[i].width()).cwiseAbs().maxCoeff());
  out.stabilized = out.stabilization_error <= 1e-12;
  return out;
}

// ---------------------------------------------------------------------------

struct MartingaleFromCurve {
  PartitionMartingale martingale;
  bool no_deviation = false;  // the root atom had no b with deviation > delta
  double min_edge_separation = kInf;
  double max_width_ratio = 0.0;  // (c-a)/(b-a) and (c-a)/(c-b) over created splits
  bool certified = false;        // every created edge separated by > delta
};

struct FromCurveOptions {
  int max_depth = 8;
  int b_grid = 256;
  double p = 2.0;
};

/// Largest deviation ||f(b) - ((c-b)/(c-a)) f(a) - ((b-a)/(c-a)) f(c)|| over the b grid; smallest b on ties.
inline std::pair<double, double> max_deviation(const Polyline& f, double a, double c, int grid, double p) {
  const Vector fa = f.at(a), fc = f.at(c);
  double best = -1.0, best_b = a;
  for (int i = 1; i < grid; ++i) {
    const double b = a + (c - a) * i / grid;
    const double dev = lp_norm(f.at(b) - ((c - b) / (c - a)) * fa - ((b - a) / (c - a)) * fc, p);
    if (dev > best) {
      best = dev;
      best_b = b;
    }
  }
  return {best, best_b};
}

inline MartingaleFromCurve from_curve(const Polyline& f, double delta, const FromCurveOptions& opt = {}) {
  f.check();
  require(delta > 0.0, "from_curve: delta must be positive");
  require(opt.b_grid >= 2, "from_curve: b grid needs at least 2 intervals");
  require(opt.max_depth >= 0, "from_curve: max depth must be >= 0");
  if (f.times.front() != 0.0 || f.times.back() != 1.0) throw UsageError("from_curve: curve must be defined on [0,1]");
  if (f.measured_lip(lp_norm_fn(opt.p)) > 1.0 + 1e-9) throw UsageError("from_curve: curve must be 1-Lipschitz");
  MartingaleFromCurve out;
  out.martingale = PartitionMartingale(f.at(1.0) - f.at(0.0));
  std::vector<int> frontier = {0};
  for (int depth = 0; depth < opt.max_depth && !frontier.empty(); ++depth) {
    std::vector<int> next;
    for (int idx : frontier) {
      const double a = out.martingale.node(idx).a, c = out.martingale.node(idx).c;
      const auto [dev, b] = max_deviation(f, a, c, opt.b_grid, opt.p);
      if (!(dev > delta * (c - a))) continue;
      const Vector fa = f.at(a), fb = f.at(b), fc = f.at(c);
      const Vector parent = out.martingale.node(idx).value;
      const int li = out.martingale.split(idx, b, (fb - fa) / (b - a), (fc - fb) / (c - b));
      for (int child : {li, li + 1}) {
        out.min_edge_separation =
            std::min(out.min_edge_separation, lp_norm(out.martingale.node(child).value - parent, opt.p));
        next.push_back(child);
      }
      out.max_width_ratio = std::max({out.max_width_ratio, (c - a) / (b - a), (c - a) / (c - b)});
    }
    frontier = std::move(next);
  }
  out.no_deviation = out.martingale.nodes().size() == 1;
  out.certified = out.no_deviation || out.min_edge_separation > delta;
  return out;
}

// ---------------------------------------------------------------------------

struct ObstructionReport {
  double eps_lower_bound = 0.0;
  int level = 0;           // n: outer atom level
  double outer_width = 0.0;
  double jump = 0.0;       // ||M_n(x0) - M_{n+1}(x0)||
};

/// Deepest nested pair of atoms containing x0 whose outer width is <= eta;
/// ||M_n(x0) - M_{n+1}(x0)|| / 4 bounds from below any eps for which the
/// integrated curve could be (eps, eta)-Frechet-like at x0.
inline ObstructionReport frechet_obstruction(const PartitionMartingale& m, double x0, double eta, double p = 2.0) {
  detail::check_structure(m);
  if (!(x0 >= 0.0 && x0 < 1.0)) throw UsageError("frechet_obstruction: x0 must lie in [0,1)");
  require(eta > 0.0, "frechet_obstruction: eta must be positive");
  const auto ch = m.chain(x0);
  std::optional<ObstructionReport> best;
  for (std::size_t i = 0; i + 1 < ch.size(); ++i) {
    const auto& outer = m.node(ch[i]);
    if (outer.width() > eta) continue;
    ObstructionReport rep;
    rep.level = outer.level;
    rep.outer_width = outer.width();
    rep.jump = lp_norm(m.node(ch[i + 1]).value - outer.value, p);
    rep.eps_lower_bound = rep.jump / 4.0;
    best = rep;
  }
  if (!best) throw UsageError("frechet_obstruction: no nested pair of atoms with width <= eta (tree too shallow)");
  return *best;
}

}  // namespace lipquot
