#pragma once

// Exact minimax (Chebyshev) affine fitting on finite samples.
//
// Scalar data and l_inf-valued data reduce to one small LP per coordinate.
// l_1-valued data on small samples is solved jointly (the coordinatewise
// reduction is not exact there). Other codomain norms fall back to the
// coordinatewise l_inf fit, whose optimum is a lower bound for the true one,
// and report the norm-equivalence slack dim^{1/p}.

#include "lipquot/lp.hpp"
#include "lipquot/space.hpp"

#include <vector>

namespace lipquot {

struct AffineMap {
  Matrix linear;  // out_dim x in_dim
  Vector offset;  // out_dim

  AffineMap() = default;
  AffineMap(Matrix a, Vector b) : linear(std::move(a)), offset(std::move(b)) {
    require(linear.rows() == offset.size(), "affine map: offset dimension mismatch");
  }
  static AffineMap constant(int in_dim, const Vector& value) {
    return {Matrix::Zero(value.size(), in_dim), value};
  }

  int in_dim() const { return static_cast<int>(linear.cols()); }
  int out_dim() const { return static_cast<int>(linear.rows()); }

  Vector operator()(const Vector& x) const {
    if (x.size() != linear.cols()) throw UsageError("affine map: input dimension mismatch");
    return linear * x + offset;
  }
  double scalar(const Vector& x) const { return (*this)(x)[0]; }
};

struct FitResult {
  AffineMap map;
  double error = 0.0;        // max_i ||f(x_i) - A(x_i)||, recomputed after the solve
  int active_count = 0;      // samples within 1e-9 of the error
  double lower_bound = 0.0;  // certified lower bound on the optimal sample error
  double slack = 1.0;        // 1 when the fit is exact for the codomain norm
  bool exact = true;
  bool certified = true;     // dual feasibility verified to tolerance
};

inline constexpr int kMaxFitSamples = 20000;

namespace detail {

struct ScalarFit {
  Vector coef;  // slope (in_dim) then offset
  double lower_bound;
  bool certified;
};

/// Variables (a, b, e): rows  a.x_i + b - e <= f_i  and  -a.x_i - b - e <= -f_i.
inline ScalarFit scalar_minimax(const std::vector<Vector>& xs, const std::vector<double>& fs) {
  const int n = static_cast<int>(xs.front().size());
  const int count = static_cast<int>(xs.size());
  Matrix g(2 * count, n + 2);
  Vector h(2 * count);
  for (int i = 0; i < count; ++i) {
    g.block(2 * i, 0, 1, n) = xs[i].transpose();
    g(2 * i, n) = 1.0;
    g(2 * i, n + 1) = -1.0;
    h[2 * i] = fs[i];
    g.block(2 * i + 1, 0, 1, n) = -xs[i].transpose();
    g(2 * i + 1, n) = -1.0;
    g(2 * i + 1, n + 1) = -1.0;
    h[2 * i + 1] = -fs[i];
  }
  Vector c = Vector::Zero(n + 2);
  c[n + 1] = 1.0;
  const LpResult lp = solve_lp_min(c, g, h);
  return {lp.z.head(n + 1), lp.dual_value, lp.certified};
}

/// Joint fit under the l_1 codomain norm. Variables: A (row-major), b,
/// per-sample per-coordinate bounds t_ij, and the error e.
inline FitResult l1_joint_minimax(const std::vector<Vector>& xs, const std::vector<Vector>& ys) {
  const int n = static_cast<int>(xs.front().size());
  const int m = static_cast<int>(ys.front().size());
  const int count = static_cast<int>(xs.size());
  const int nv = m * (n + 1) + count * m + 1;
  const int rows = 2 * count * m + count;
  Matrix g = Matrix::Zero(rows, nv);
  Vector h = Vector::Zero(rows);
  auto a_idx = [&](int j, int k) { return j * (n + 1) + k; };  // k == n is the offset
  auto t_idx = [&](int i, int j) { return m * (n + 1) + i * m + j; };
  const int e_idx = nv - 1;
  int row = 0;
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < m; ++j) {
      for (int sgn : {1, -1}) {
        for (int k = 0; k < n; ++k) g(row, a_idx(j, k)) = sgn * xs[i][k];
        g(row, a_idx(j, n)) = sgn;
        g(row, t_idx(i, j)) = -1.0;
        h[row] = sgn * ys[i][j];
        ++row;
      }
    }
    for (int j = 0; j < m; ++j) g(row, t_idx(i, j)) = 1.0;
    g(row, e_idx) = -1.0;
    ++row;
  }
  Vector c = Vector::Zero(nv);
  c[e_idx] = 1.0;
  const LpResult lp = solve_lp_min(c, g, h);
  FitResult out;
  Matrix a(m, n);
  Vector b(m);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < n; ++k) a(j, k) = lp.z[a_idx(j, k)];
    b[j] = lp.z[a_idx(j, n)];
  }
  out.map = AffineMap(a, b);
  out.lower_bound = lp.dual_value;
  out.certified = lp.certified;
  return out;
}

inline void finalize_fit(FitResult& fit, const std::vector<Vector>& xs, const std::vector<Vector>& ys, double p) {
  std::vector<double> errs(xs.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    errs[i] = lp_norm(ys[i] - fit.map(xs[i]), p);
    worst = std::max(worst, errs[i]);
  }
  fit.error = worst;
  fit.active_count = 0;
  for (double e : errs)
    if (e >= worst - 1e-9) ++fit.active_count;
  // the dual value is a lower bound only up to floating point; never report above the attained error
  fit.lower_bound = std::min(fit.lower_bound, worst);
}

}  // namespace detail

/// Minimax affine fit of vector data under the given codomain norm.
inline FitResult minimax_affine_fit(const std::vector<Vector>& xs, const std::vector<Vector>& ys,
                                    const NormedSpace& codomain) {
  if (xs.empty()) throw UsageError("minimax_affine_fit: empty sample list");
  require(xs.size() == ys.size(), "minimax_affine_fit: point and value counts differ");
  require(static_cast<int>(xs.size()) <= kMaxFitSamples, "minimax_affine_fit: at most 20000 samples supported");
  const int n = static_cast<int>(xs.front().size());
  const int m = codomain.dim();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(xs[i].size() == n, "minimax_affine_fit: inconsistent input dimensions");
    codomain.check_dim(ys[i]);
  }
  const double p = codomain.p();

  if (m > 1 && p == 1.0 && static_cast<long>(xs.size()) * m <= 600) {
    FitResult fit = detail::l1_joint_minimax(xs, ys);
    detail::finalize_fit(fit, xs, ys, p);
    return fit;
  }

  FitResult fit;
  Matrix a(m, n);
  Vector b(m);
  double lb = 0.0;
  bool certified = true;
  std::vector<double> fs(xs.size());
  for (int j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < xs.size(); ++i) fs[i] = ys[i][j];
    const auto sf = detail::scalar_minimax(xs, fs);
    a.row(j) = sf.coef.head(n).transpose();
    b[j] = sf.coef[n];
    lb = std::max(lb, sf.lower_bound);
    certified = certified && sf.certified;
  }
  fit.map = AffineMap(a, b);
  fit.lower_bound = lb;
  fit.certified = certified;
  fit.exact = m == 1 || std::isinf(p);
  fit.slack = fit.exact ? 1.0 : std::pow(static_cast<double>(m), 1.0 / p);
  detail::finalize_fit(fit, xs, ys, p);
  return fit;
}

inline FitResult minimax_affine_fit(const std::vector<Vector>& xs, const std::vector<double>& fs) {
  std::vector<Vector> ys;
  ys.reserve(fs.size());
  for (double f : fs) ys.push_back(Vector::Constant(1, f));
  return minimax_affine_fit(xs, ys, NormedSpace::euclidean(1));
}

/// Error of a given affine map on the samples, in the codomain norm.
inline double affine_error(const AffineMap& a, const std::vector<Vector>& xs, const std::vector<Vector>& ys,
                           double p) {
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) worst = std::max(worst, lp_norm(ys[i] - a(xs[i]), p));
  return worst;
}

}  // namespace lipquot
