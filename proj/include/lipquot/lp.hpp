#pragma once

// Dense revised simplex for small-row linear programs.
//
// Minimax fitting produces programs  min c.z  s.t.  G z <= h  with few
// variables and many constraints. We solve the dual
//     max q.y  s.t.  E y = g,  y >= 0,   E = G^T, g = -c, q = -h
// whose basis is only (#variables) wide, and read the primal optimum off the
// simplex multipliers (z = -pi). The dual objective is a weak-duality lower
// bound on the primal optimum whenever y is feasible.

#include "lipquot/core.hpp"

#include <Eigen/LU>

#include <vector>

namespace lipquot {

struct LpResult {
  Vector z;                 // primal minimizer
  double dual_value = 0.0;  // q.y at the final basis (lower bound on min c.z)
  double max_reduced_cost = 0.0;
  double dual_infeasibility = 0.0;  // ||E y - g||_inf
  bool certified = false;           // all reduced costs <= tolerance
  int iterations = 0;
};

struct LpOptions {
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-11;
  int degenerate_switch = 50;  // Dantzig pricing falls back to Bland after this many stalls
  int max_iterations = 0;      // 0 = automatic
};

namespace detail {

class SimplexCore {
 public:
  SimplexCore(const Matrix& e, const Vector& g, const LpOptions& opt) : e_(e), g_(g), opt_(opt) {
    m_ = static_cast<int>(e.rows());
    k_ = static_cast<int>(e.cols());
  }

  /// Runs phase I and II; returns dual basis variables via y.
  LpResult solve(const Vector& q) {
    // make the right-hand side nonnegative, then append artificials
    sign_ = Vector::Ones(m_);
    for (int i = 0; i < m_; ++i)
      if (g_[i] < 0) sign_[i] = -1.0;
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) basis_[i] = k_ + i;
    allow_artificial_ = true;

    Vector q1 = Vector::Zero(k_ + m_);
    q1.tail(m_).setConstant(-1.0);
    int iters = run(q1);
    const double infeas = basic_values().cwiseMax(0.0).dot(artificial_mask());
    if (infeas > 1e-7 * std::max(1.0, g_.cwiseAbs().maxCoeff()))
      throw NumericalFailure("simplex: the fitting program is infeasible (phase I)");
    drive_out_artificials();

    allow_artificial_ = false;
    Vector q2 = Vector::Zero(k_ + m_);
    q2.head(k_) = q;
    iters += run(q2);

    LpResult res;
    res.iterations = iters;
    const Vector xb = basic_values();
    Vector y = Vector::Zero(k_);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < k_) y[basis_[i]] = std::max(0.0, xb[i]);
    const Vector pi = multipliers(q2);
    res.z = -pi;
    res.dual_value = q.dot(y);
    res.dual_infeasibility = (e_ * y - g_).cwiseAbs().maxCoeff();
    double worst = 0.0;
    for (int j = 0; j < k_; ++j) worst = std::max(worst, q[j] - pi.dot(e_.col(j)));
    res.max_reduced_cost = worst;
    res.certified = worst <= opt_.optimality_tol;
    return res;
  }

 private:
  Vector column(int j) const {
    if (j < k_) return e_.col(j).cwiseProduct(sign_);
    Vector u = Vector::Zero(m_);
    u[j - k_] = 1.0;
    return u;
  }

  Matrix basis_matrix() const {
    Matrix b(m_, m_);
    for (int i = 0; i < m_; ++i) b.col(i) = column(basis_[i]);
    return b;
  }

  Vector rhs() const { return g_.cwiseProduct(sign_); }
  Vector basic_values() const { return basis_matrix().partialPivLu().solve(rhs()); }

  Vector artificial_mask() const {
    Vector mask(m_);
    for (int i = 0; i < m_; ++i) mask[i] = basis_[i] >= k_ ? 1.0 : 0.0;
    return mask;
  }

  /// Multipliers pi for the original (unflipped) rows.
  Vector multipliers(const Vector& q) const {
    Vector qb(m_);
    for (int i = 0; i < m_; ++i) qb[i] = q[basis_[i]];
    const Vector pi_flipped = basis_matrix().transpose().partialPivLu().solve(qb);
    return pi_flipped.cwiseProduct(sign_);
  }

  /// Simplex iterations with an explicitly maintained basis inverse
  /// (product-form updates, refactorized periodically for stability).
  int run(const Vector& q) {
    const int cap = opt_.max_iterations > 0 ? opt_.max_iterations : 50 * (k_ + m_) + 1000;
    int stalls = 0;
    std::vector<char> in_basis(k_ + m_, 0);
    for (int b : basis_) in_basis[b] = 1;
    Matrix binv = basis_matrix().partialPivLu().inverse();
    const Vector b_rhs = rhs();
    for (int it = 0; it < cap; ++it) {
      if (it > 0 && it % 64 == 0) binv = basis_matrix().partialPivLu().inverse();
      const Vector xb = binv * b_rhs;
      Vector qb(m_);
      for (int i = 0; i < m_; ++i) qb[i] = q[basis_[i]];
      const Vector pi = binv.transpose() * qb;

      const bool bland = stalls >= opt_.degenerate_switch;
      int enter = -1;
      double best = opt_.optimality_tol * 1e-2;
      const int limit = allow_artificial_ ? k_ + m_ : k_;
      const Vector priced = e_.transpose() * pi.cwiseProduct(sign_);
      for (int j = 0; j < limit; ++j) {
        if (in_basis[j]) continue;
        const double d = q[j] - (j < k_ ? priced[j] : pi[j - k_]);
        if (d > best) {
          enter = j;
          if (bland) break;
          best = d;
        }
      }
      if (enter < 0) return it;

      const Vector w = binv * column(enter);
      int leave = -1;
      double ratio = kInf;
      for (int i = 0; i < m_; ++i) {
        if (w[i] <= opt_.pivot_tol) continue;
        const double r = std::max(0.0, xb[i]) / w[i];
        if (r < ratio - 1e-15) {
          ratio = r;
          leave = i;
        } else if (r <= ratio + 1e-15 && basis_[i] < basis_[leave]) {
          leave = i;
        }
      }
      if (leave < 0) throw NumericalFailure("simplex: unbounded direction in the fitting program");
      stalls = ratio <= 1e-14 ? stalls + 1 : 0;
      in_basis[basis_[leave]] = 0;
      basis_[leave] = enter;
      in_basis[enter] = 1;
      // pivot the inverse on (leave, w)
      binv.row(leave) /= w[leave];
      for (int i = 0; i < m_; ++i)
        if (i != leave && w[i] != 0.0) binv.row(i) -= w[i] * binv.row(leave);
    }
    throw NumericalFailure("simplex: iteration cap reached");
  }

  void drive_out_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < k_) continue;
      const Matrix b = basis_matrix();
      const auto lu = b.partialPivLu();
      std::vector<char> in_basis(k_, 0);
      for (int bb : basis_)
        if (bb < k_) in_basis[bb] = 1;
      for (int j = 0; j < k_; ++j) {
        if (in_basis[j]) continue;
        const Vector w = lu.solve(column(j));
        if (std::abs(w[i]) > 1e-9) {
          basis_[i] = j;
          break;
        }
      }
      // a remaining artificial marks a redundant row; it stays at zero
    }
  }

  const Matrix& e_;
  const Vector& g_;
  LpOptions opt_;
  int m_ = 0, k_ = 0;
  Vector sign_;
  std::vector<int> basis_;
  bool allow_artificial_ = true;
};

}  // namespace detail

/// min c.z subject to G z <= h (z free). The program must be bounded.
inline LpResult solve_lp_min(const Vector& c, const Matrix& g, const Vector& h, const LpOptions& opt = {}) {
  require(g.cols() == c.size() && g.rows() == h.size(), "solve_lp_min: inconsistent dimensions");
  const Matrix e = g.transpose();
  const Vector rhs = -c;
  detail::SimplexCore core(e, rhs, opt);
  return core.solve(-h);
}

}  // namespace lipquot
