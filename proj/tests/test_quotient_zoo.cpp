#include "lipquot/quotient_zoo.hpp"

#include <gtest/gtest.h>

#include <complex>

using namespace lipquot;

namespace {

using cplx = std::complex<double>;

Vector v2(double a, double b) { return from_list({a, b}); }

// Oracle: z -> z^2 / |z| in complex arithmetic.
Vector fold_oracle(const Vector& p) {
  const cplx z(p[0], p[1]);
  if (std::abs(z) == 0.0) return Vector::Zero(2);
  const cplx w = z * z / std::abs(z);
  return v2(w.real(), w.imag());
}

// Oracle: r^2 e^{2 pi i / r} z with r read off the piecewise profile.
Vector spiral_oracle(const Vector& x, double a) {
  const double t = std::hypot(x[0], x[1]);
  double r;
  if (std::abs(a) > 1.0 || t >= 2.0)
    r = 1.0;
  else if (t <= 1.0)
    r = std::abs(a);
  else
    r = std::abs(a) + (1.0 - std::abs(a)) * (t - 1.0);
  if (r == 0.0) return Vector::Zero(2);
  const cplx w = r * r * std::polar(1.0, 2.0 * std::numbers::pi / r) * cplx(x[0], x[1]);
  return v2(w.real(), w.imag());
}

// Oracle: the l_p cut-off map slot by slot, straight from the definition.
double cut_oracle(int k, double t) {
  const double s = std::abs(t), thr = std::pow(2.0, -k);
  double v = 0.0;
  if (s >= thr)
    v = s;
  else if (s > thr / 2)
    v = thr * (s - thr / 2) / (thr / 2);
  return t < 0 ? -v : v;
}

Vector cutoff_map_oracle(int n, int m, double p, const Vector& z) {
  Vector out(n);
  for (int i = 0; i < n; ++i) {
    double pos = 0, neg = 0;
    for (int k = 0; k < m; ++k) {
      const double g = cut_oracle(k, z[i * m + k]);
      (g > 0 ? pos : neg) += std::pow(std::abs(g), p);
    }
    out[i] = std::pow(pos, 1 / p) - std::pow(neg, 1 / p);
  }
  return out;
}

// Oracle: f(y, 2^k) summed over every net point, no neighbour index.
Vector level_oracle(const ZooMapSpec& s, int k, const Vector& y) {
  const double tk = std::ldexp(1.0, k);
  Vector out = Vector::Zero(y.size());
  for (const auto& u : s.prop41.nets.at(k)) {
    const double d = lp_norm(y - u, s.prop41.p);
    if (d == 0) continue;
    out += std::max(0.0, tk - std::abs(d - tk)) * (y - u) / d;
  }
  return out;
}

const ZooMapSpec& small_prop41() {
  static const ZooMapSpec s = [] {
    Prop41Params p;
    p.k_min = -5;
    p.k_max = -2;
    p.net_region = 1.5;
    p.seed = 3;
    return build_prop41(p);
  }();
  return s;
}

double min_pair_distance(const std::vector<Vector>& pts, double p) {
  double best = kInf;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, lp_norm(pts[i] - pts[j], p));
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// evaluation

TEST(Fold, ReferencePointAndOracle) {
  const auto s = ZooMapSpec::fold();
  const Vector w = zoo_eval(s, v2(0, 1));
  EXPECT_NEAR(w[0], -1.0, 1e-15);
  EXPECT_NEAR(w[1], 0.0, 1e-15);
  Rng rng(1, "fold");
  for (int i = 0; i < 500; ++i) {
    const Vector p = rng.normal_vector(2) * 3.0;
    EXPECT_LE((zoo_eval(s, p) - fold_oracle(p)).norm(), 1e-12);
    EXPECT_NEAR(zoo_eval(s, p).norm(), p.norm(), 1e-12);
  }
  EXPECT_EQ(zoo_eval(s, v2(0, 0)), Vector::Zero(2));
}

TEST(Fold, WrongDimensionIsUsageError) {
  EXPECT_THROW(zoo_eval(ZooMapSpec::fold(), Vector::Zero(3)), UsageError);
}

TEST(Spiral, IdentityAndVanishingAreExact) {
  const auto s = ZooMapSpec::prop42();
  Rng rng(2, "spiral");
  for (int i = 0; i < 1000; ++i) {
    Vector x = rng.normal_vector(2);
    x *= rng.uniform(0.0, 1.0) / x.norm();
    EXPECT_EQ(zoo_eval(s, from_list({x[0], x[1], 0.0})), Vector::Zero(2));
    Vector far = rng.normal_vector(2);
    far *= rng.uniform(2.0, 5.0) / far.norm();
    const double a = rng.uniform(-1.0, 1.0);
    EXPECT_EQ(zoo_eval(s, from_list({far[0], far[1], a})), far);
    const double big = rng.uniform(1.0, 3.0) * (i % 2 ? 1 : -1);
    EXPECT_EQ(zoo_eval(s, from_list({x[0], x[1], big})), x);
  }
}

TEST(Spiral, MatchesComplexOracle) {
  const auto s = ZooMapSpec::prop42();
  Rng rng(3, "spiral_oracle");
  for (int i = 0; i < 1000; ++i) {
    const Vector x = rng.normal_vector(2) * 1.2;
    const double a = rng.uniform(-1.2, 1.2);
    EXPECT_LE((zoo_eval(s, from_list({x[0], x[1], a})) - spiral_oracle(x, a)).norm(), 1e-12);
  }
}

TEST(Spiral, SliceAgreesWithFullMap) {
  const auto full = ZooMapSpec::prop42();
  const auto slice = ZooMapSpec::prop42(0.5);
  EXPECT_EQ(slice.in_dim(), 2);
  const Vector x = v2(0.3, -1.4);
  EXPECT_EQ(zoo_eval(slice, x), zoo_eval(full, from_list({0.3, -1.4, 0.5})));
}

TEST(CutoffMap, VanishesBelowThreshold) {
  const auto s = ZooMapSpec::prop311_map(4, 6, 2.0);
  Rng rng(4, "cut");
  for (int i = 0; i < 200; ++i) {
    Vector z(24);
    for (int k = 0; k < 24; ++k) z[k] = rng.uniform(-1.0, 1.0) * std::ldexp(1.0, -6);
    EXPECT_EQ(zoo_eval(s, z), Vector::Zero(4));
  }
}

TEST(CutoffMap, MatchesDefinition) {
  for (double p : {1.0, 2.0, 3.0}) {
    const auto s = ZooMapSpec::prop311_map(3, 5, p);
    Rng rng(5, "cut_oracle");
    for (int i = 0; i < 300; ++i) {
      const Vector z = rng.normal_vector(15) * 0.4;
      EXPECT_LE((zoo_eval(s, z) - cutoff_map_oracle(3, 5, p, z)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(CutoffMap, OddInEachSlot) {
  const auto s = ZooMapSpec::prop311_map(2, 4, 2.0);
  Rng rng(6, "odd");
  for (int i = 0; i < 50; ++i) {
    const Vector z = rng.normal_vector(8);
    EXPECT_EQ(zoo_eval(s, -z), -zoo_eval(s, z));
  }
}

// ---------------------------------------------------------------------------
// nets and the net-translation map

TEST(BuildNet, LatticeOrderOnAnInterval) {
  const auto net = build_net(NormedSpace::euclidean(1), 4.0, 10.0, 0, NetOrder::lattice);
  EXPECT_GE(net.size(), 5u);
  EXPECT_LE(net.size(), 6u);
  EXPECT_GE(min_pair_distance(net, 2.0), 4.0);
}

TEST(BuildNet, ShuffledIsSeparatedAndMaximal) {
  const NormedSpace sp = NormedSpace::euclidean(2);
  for (std::uint64_t seed : {1u, 2u}) {
    const auto net = build_net(sp, 0.25, 1.5, seed);
    EXPECT_GE(min_pair_distance(net, 2.0), 0.25);
    for (const auto& u : net) EXPECT_LE(u.norm(), 1.5 + 1e-12);
    Rng rng(seed, "probe");
    const Norm norm = lp_norm_fn(2.0);
    for (int i = 0; i < 10000; ++i) {
      const Vector q = sample_ball(norm, Vector::Zero(2), 1.5, rng);
      double best = kInf;
      for (const auto& u : net) best = std::min(best, (q - u).norm());
      ASSERT_LT(best, 0.25) << "probe " << i;
    }
  }
}

TEST(BuildNet, WideSeparationGivesOnePoint) {
  EXPECT_EQ(build_net(NormedSpace::euclidean(2), 5.0, 2.0, 7).size(), 1u);
  EXPECT_THROW(build_net(NormedSpace::euclidean(2), 1.0, 0.0, 7), UsageError);
}

TEST(BuildNet, DeterministicForSeed) {
  const auto a = build_net(NormedSpace(2, 1.0), 0.3, 1.0, 11);
  const auto b = build_net(NormedSpace(2, 1.0), 0.3, 1.0, 11);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(NetMap, NetsAreSeparatedPerLevel) {
  const auto& s = small_prop41();
  for (const auto& [k, pts] : s.prop41.nets) EXPECT_GE(min_pair_distance(pts, 2.0), 4.0 * std::ldexp(1.0, k));
}

TEST(NetMap, VanishesOnUnitBallOfZeroLevel) {
  const auto& s = small_prop41();
  Rng rng(8, "vanish");
  for (int i = 0; i < 500; ++i) {
    Vector x = rng.normal_vector(2), y = rng.normal_vector(2);
    x *= rng.uniform(0.0, 1.0) / x.norm();
    y *= rng.uniform(0.0, s.prop41.y_margin()) / y.norm();
    Vector pt(5);
    pt << x, y, 0.0;
    EXPECT_EQ(zoo_eval(s, pt), Vector::Zero(2));
  }
}

TEST(NetMap, LevelValuesMatchBruteForce) {
  const auto& s = small_prop41();
  Rng rng(9, "levels");
  for (int i = 0; i < 400; ++i) {
    Vector y = rng.normal_vector(2);
    y *= rng.uniform(0.0, s.prop41.y_margin()) / y.norm();
    const int k = s.prop41.k_min + static_cast<int>(rng.index(s.prop41.k_max - s.prop41.k_min + 1));
    Vector pt = Vector::Zero(5);
    pt.segment(2, 2) = y;
    pt[4] = std::ldexp(1.0, k) * (i % 2 ? 1 : -1);
    EXPECT_LE((zoo_eval(s, pt) - level_oracle(s, k, y)).norm(), 1e-13);
  }
}

TEST(NetMap, NormBoundedByLambda) {
  const auto& s = small_prop41();
  Rng rng(10, "lambda");
  for (int i = 0; i < 2000; ++i) {
    Vector pt = Vector::Zero(5);
    Vector y = rng.normal_vector(2);
    y *= rng.uniform(0.0, s.prop41.y_margin()) / y.norm();
    pt.segment(2, 2) = y;
    pt[4] = rng.uniform(-0.6, 0.6);
    EXPECT_LE(zoo_eval(s, pt).norm(), std::abs(pt[4]) * (1 + 1e-12));
  }
}

TEST(NetMap, EvenInLambdaAndAffineBetweenLevels) {
  const auto& s = small_prop41();
  Vector pt = Vector::Zero(5);
  pt << 0.2, 0.1, 0.13, -0.05, 0.1;
  Vector neg = pt;
  neg[4] = -0.1;
  EXPECT_EQ(zoo_eval(s, pt), zoo_eval(s, neg));
  // lambda = 0.1 sits between 2^-4 and 2^-3 with weight 0.6 on the upper level
  const Vector y = pt.segment(2, 2);
  const Vector expect = 0.5 * 0.1 * pt.head(2) + 0.4 * level_oracle(s, -4, y) + 0.6 * level_oracle(s, -3, y);
  EXPECT_LE((zoo_eval(s, pt) - expect).norm(), 1e-14);
}

TEST(NetMap, OutOfRegionIsUsageError) {
  const auto& s = small_prop41();
  Vector pt = Vector::Zero(5);
  pt[2] = s.prop41.y_margin() + 0.01;
  EXPECT_THROW(zoo_eval(s, pt), UsageError);
}

// ---------------------------------------------------------------------------
// cover checks

TEST(Cover, ProjectionCoveredRadiusIsR) {
  Matrix a(1, 2);
  a << 1, 0;
  const auto s = ZooMapSpec::linear_map(a);
  for (double r : {0.3, 1.0}) {
    const auto rep = cover_check(s, v2(0.2, -0.1), r, 0.0, 8, 1, CoverMode::bisect);
    ASSERT_TRUE(rep.covered_radius_estimate.has_value());
    EXPECT_NEAR(*rep.covered_radius_estimate, r, 2e-6);
  }
}

TEST(Cover, FoldAtOriginCoversTheWholeBall) {
  const auto rep = cover_check(ZooMapSpec::fold(), v2(0, 0), 1.0, 0.0, 12, 2, CoverMode::bisect);
  EXPECT_GE(*rep.covered_radius_estimate, 1.0 - 1e-3);
  EXPECT_LE(*rep.covered_radius_estimate, 1.0 + 1e-5);
}

TEST(Cover, SpiralCaseTwoAtCubicRadius) {
  const double r = 0.5;
  const auto rep =
      cover_check(ZooMapSpec::prop42(), from_list({0.5, 0.0, 0.01}), r, r * r * r / 400, 16, 3, CoverMode::verify);
  EXPECT_TRUE(rep.covered) << rep.worst_residual;
  EXPECT_EQ(rep.targets_tried, 16);
}

TEST(Cover, CoveredAtRhoImpliesCoveredAtHalf) {
  const auto s = ZooMapSpec::fold();
  const Vector c = v2(0.7, 0.4);
  for (double rho : {0.05, 0.2, 0.4}) {
    const auto a = cover_check(s, c, 0.4, rho, 8, 4, CoverMode::verify);
    if (a.covered) {
      EXPECT_TRUE(cover_check(s, c, 0.4, rho / 2, 8, 4, CoverMode::verify).covered);
    }
  }
}

TEST(Cover, UnreachableTargetsReportFailure) {
  // the fold preserves norms, so targets outside the image ball are not hit
  const auto rep = cover_check(ZooMapSpec::fold(), v2(0, 0), 0.5, 0.8, 6, 5, CoverMode::verify);
  EXPECT_FALSE(rep.covered);
  EXPECT_NEAR(rep.worst_residual, 0.3, 1e-6);
}

// ---------------------------------------------------------------------------
// the constructive solve

TEST(CutoffSolve, FixedPointWhenAlreadySolved) {
  const auto s = ZooMapSpec::prop311_map(3, 6, 2.0);
  Rng rng(12, "fixed");
  const Vector x = rng.normal_vector(18) * 0.3;
  const auto sol = prop311_solve(s, x, zoo_eval(s, x));
  EXPECT_EQ(sol.z, x);
  EXPECT_EQ(sol.ratio, 0.0);
}

TEST(CutoffSolve, FromZeroUsesOneCoordinate) {
  const auto s = ZooMapSpec::prop311_map(3, 6, 2.0);
  const Vector y = from_list({0.1, 0.0, 0.0});
  const auto sol = prop311_solve(s, Vector::Zero(18), y);
  int nonzero = 0;
  for (int i = 0; i < 18; ++i) nonzero += sol.z[i] != 0.0;
  EXPECT_EQ(nonzero, 1);
  EXPECT_NE(sol.z.head(6).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((zoo_eval(s, sol.z) - y).norm(), 1e-8);
  EXPECT_EQ(sol.slots[0].branch, "single");
}

// Points with decaying tails, as l_p sequences have; gaps |b_n| >= 0.05.
TEST(CutoffSolve, RandomTargetsWithinRatio) {
  for (double p : {2.0, 1.5}) {
    const auto s = ZooMapSpec::prop311_map(8, 10, p);
    Rng rng(13, "targets");
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      Vector x(80);
      for (int j = 0; j < 80; ++j) x[j] = 0.5 * rng.normal() * std::ldexp(1.0, -(j % 10));
      Vector y = zoo_eval(s, x);
      for (int n = 0; n < 8; ++n) y[n] += rng.uniform(0.05, 0.5) * (rng.uniform() < 0.5 ? -1 : 1);
      const auto sol = prop311_solve(s, x, y);
      EXPECT_LE(lp_norm(zoo_eval(s, sol.z) - y, p), 1e-8);
      worst = std::max(worst, sol.ratio);
    }
    EXPECT_LE(worst, 20.0);
  }
}

TEST(CutoffSolve, PositivePartBelowGapFallsBackToScaling) {
  // one coordinate just above its half threshold: A tiny, and no single index crosses 2^-k
  const auto s = ZooMapSpec::prop311_map(1, 3, 2.0);
  const Vector x2 = from_list({0.6, 0.0, -0.3});  // g_0(0.6) = 0.2 = A
  const auto sol = prop311_solve(s, x2, from_list({zoo_eval(s, x2)[0] + 0.25}));
  EXPECT_LE(std::abs(zoo_eval(s, sol.z)[0] - zoo_eval(s, x2)[0] - 0.25), 1e-10);
  EXPECT_EQ(sol.slots[0].branch, "scale");
}

TEST(CutoffSolve, NegativeGapUsesMirroredBranch) {
  const auto s = ZooMapSpec::prop311_map(1, 4, 2.0);
  const Vector x = from_list({0.9, 0.0, 0.0, 0.0});
  const auto sol = prop311_solve(s, x, from_list({0.4}));
  EXPECT_EQ(sol.slots[0].branch, "single");
  EXPECT_NEAR(zoo_eval(s, sol.z)[0], 0.4, 1e-10);
  const auto up = prop311_solve(s, x, from_list({1.5}));
  EXPECT_EQ(up.slots[0].branch, "scale");
  EXPECT_NEAR(zoo_eval(s, up.z)[0], 1.5, 1e-10);
}

TEST(CutoffSolve, TruncationTooSmallIsNumericalFailure) {
  const auto s = ZooMapSpec::prop311_map(1, 2, 2.0);
  // b = 1e-3 cannot reach the 2^-1 threshold from zero
  EXPECT_THROW(prop311_solve(s, Vector::Zero(2), from_list({1e-3})), NumericalFailure);
}

TEST(CutoffSolve, WrongKindOrDimension) {
  EXPECT_THROW(prop311_solve(ZooMapSpec::fold(), Vector::Zero(2), Vector::Zero(2)), std::exception);
  EXPECT_THROW(prop311_solve(ZooMapSpec::prop311_map(2, 2, 2.0), Vector::Zero(3), Vector::Zero(2)), UsageError);
}

// ---------------------------------------------------------------------------
// derivatives

TEST(Jacobian, MinSingularValueMatchesSvd) {
  Rng rng(14, "svd");
  for (int i = 0; i < 50; ++i) {
    const int rows = 1 + static_cast<int>(rng.index(4)), cols = rows + static_cast<int>(rng.index(3));
    Matrix j(rows, cols);
    for (int a = 0; a < rows; ++a)
      for (int b = 0; b < cols; ++b) j(a, b) = rng.normal();
    const double svd = Eigen::JacobiSVD<Matrix>(j).singularValues()(rows - 1);
    EXPECT_NEAR(min_singular_value(j), svd, 1e-6 * std::max(1.0, svd));
  }
}

TEST(Jacobian, ProjectionHasUnitMinSingularValue) {
  Matrix a(1, 2);
  a << 1, 0;
  const auto rep = jacobian_check(ZooMapSpec::linear_map(a), v2(0.3, 0.2), 1e-5);
  EXPECT_NEAR(rep.min_singular_value, 1.0, 1e-6);
}

TEST(Jacobian, FoldOnPositiveAxis) {
  const auto rep = jacobian_check(ZooMapSpec::fold(), v2(1, 0), 1e-5);
  EXPECT_NEAR(rep.jacobian(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(rep.jacobian(0, 1), 0.0, 1e-6);
  EXPECT_NEAR(rep.jacobian(1, 0), 0.0, 1e-6);
  EXPECT_NEAR(rep.jacobian(1, 1), 2.0, 1e-6);
  EXPECT_NEAR(rep.min_singular_value, 1.0, 1e-6);
}

TEST(Jacobian, CutoffMapIsFlatAtZero) {
  const auto s = ZooMapSpec::prop311_map(8, 10, 2.0);
  const auto rep = jacobian_check(s, Vector::Zero(80), 1e-5);
  EXPECT_EQ(rep.jacobian, Matrix::Zero(8, 80));
  EXPECT_EQ(rep.min_singular_value, 0.0);
}

TEST(Directional, CutoffMapZeroAtOrigin) {
  const auto s = ZooMapSpec::prop311_map(8, 10, 2.0);
  Rng rng(15, "dirs");
  for (int i = 0; i < 50; ++i) {
    Vector d = rng.normal_vector(80);
    d /= d.norm();
    const auto rep = directional_derivative(s, Vector::Zero(80), d, std::ldexp(1.0, -12));
    EXPECT_EQ(rep.limit, Vector::Zero(8));
    EXPECT_TRUE(rep.converged);
  }
}

TEST(Directional, LinearMapGivesMatrixTimesDirection) {
  Matrix a(2, 3);
  a << 1, 2, 3, -1, 0.5, 4;
  Vector d = from_list({1, -2, 2});
  d /= 3.0;
  const auto rep = directional_derivative(ZooMapSpec::linear_map(a), from_list({0.1, 0.2, 0.3}), d, 1e-6);
  EXPECT_LE((rep.limit - a * d).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_TRUE(rep.converged);
}

TEST(Directional, FoldRadialDirection) {
  const auto rep = directional_derivative(ZooMapSpec::fold(), v2(1, 0), v2(1, 0), 1e-6);
  EXPECT_LE((rep.limit - v2(1, 0)).norm(), 1e-9);
}

TEST(Directional, FoldAtOriginHasNoLinearLimitButQuotientsConverge) {
  // along a fixed ray the quotient is constant: the Gateaux derivative exists at 0 but is not linear
  const auto rep = directional_derivative(ZooMapSpec::fold(), v2(0, 0), v2(0, 1), 1e-6);
  EXPECT_LE((rep.limit - v2(-1, 0)).norm(), 1e-12);
}

TEST(Directional, RejectsNonUnitDirection) {
  EXPECT_THROW(directional_derivative(ZooMapSpec::fold(), v2(1, 0), v2(2, 0), 1e-6), std::exception);
}

// ---------------------------------------------------------------------------
// Lipschitz estimates

TEST(ZooLipschitz, FoldIsTwoLipschitz) {
  const auto f = zoo_function(ZooMapSpec::fold(), {Vector::Zero(2), 2.0});
  const double est = lip_at_scale(f, NormedSpace::euclidean(2), 0.0, 4000, 1);
  EXPECT_LE(est, 2.0 + 1e-2);
  EXPECT_GE(est, 1.9);
}

TEST(ZooLipschitz, CutoffMapStableUnderDoubling) {
  const auto s = ZooMapSpec::prop311_map(2, 4, 2.0);
  const auto f = zoo_function(s, {Vector::Zero(8), 1.0});
  const double a = lip_at_scale(f, zoo_domain_space(s), 0.0, 2000, 2);
  const double b = lip_at_scale(f, zoo_domain_space(s), 0.0, 4000, 2);
  EXPECT_GE(b, a);
  EXPECT_LE(b, 1.1 * a);
  EXPECT_LE(b, zoo_lip_bound(s));
}
