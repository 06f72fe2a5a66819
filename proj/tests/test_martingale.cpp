#include "lipquot/counterexamples.hpp"
#include "lipquot/martingale.hpp"

#include <gtest/gtest.h>

using namespace lipquot;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

PartitionMartingale rademacher() {
  PartitionMartingale m(v1(0.0));
  m.split(0, 0.5, v1(1.0), v1(-1.0));
  return m;
}

// Staircase with n steps on [0,1]: unit speed in l_1^n after rescaling by 1/n.
Polyline staircase_polyline(int n) {
  Polyline p;
  for (int i = 0; i <= n; ++i) {
    p.times.push_back(static_cast<double>(i) / n);
    p.points.push_back(staircase_point(n, i) / n);
  }
  p.lip_bound = 1.0;
  return p;
}

// Oracle: deviation of the staircase at b on [a,c), evaluated from the closed form.
double staircase_deviation(int n, double a, double b, double c) {
  auto f = [n](double t) { return Vector(staircase_point(n, n * t) / n); };
  return lp_norm(f(b) - ((c - b) / (c - a)) * f(a) - ((b - a) / (c - a)) * f(c), 1.0);
}

}  // namespace

TEST(Validate, RademacherIsSeparatedAtOne) {
  const auto rep = validate_martingale(rademacher(), 1.0);
  EXPECT_TRUE(rep.is_martingale);
  EXPECT_TRUE(rep.is_bounded);
  EXPECT_TRUE(rep.is_separated);
  EXPECT_TRUE(rep.is_dyadic);
  EXPECT_EQ(rep.bound, 1.0);
  EXPECT_FALSE(validate_martingale(rademacher(), 1.5).is_separated);
}

TEST(Validate, BrokenAverage) {
  PartitionMartingale m(v1(0.0));
  m.split(0, 0.5, v1(1.0), v1(1.0));
  EXPECT_FALSE(validate_martingale(m, 0.5).is_martingale);
}

TEST(Validate, UnequalSplitsAreNotDyadic) {
  PartitionMartingale m(v1(0.0));
  m.split(0, 0.25, v1(3.0), v1(-1.0));
  const auto rep = validate_martingale(m, 1.0);
  EXPECT_TRUE(rep.is_martingale);
  EXPECT_FALSE(rep.is_dyadic);
}

TEST(Validate, MalformedTreesAreStructuralErrors) {
  auto m = rademacher();
  m.mutable_nodes()[1].c = 0.4;  // gap between the children
  EXPECT_THROW(validate_martingale(m, 1.0), UsageError);
  auto m2 = rademacher();
  m2.mutable_nodes()[2].a = 0.6;
  EXPECT_THROW(validate_martingale(m2, 1.0), UsageError);
  PartitionMartingale m3(v1(0.0));
  EXPECT_THROW(m3.split(0, 1.0, v1(0), v1(0)), UsageError);
}

TEST(ToCurve, RademacherIntegrates) {
  const auto out = to_curve(rademacher());
  ASSERT_EQ(out.curve.size(), 3u);
  EXPECT_EQ(out.curve.at(0.5)[0], 0.5);
  EXPECT_EQ(out.curve.at(1.0)[0], 0.0);
  EXPECT_TRUE(out.stabilized);
  EXPECT_EQ(out.curve.lip_bound, 1.0);
}

TEST(ToCurve, ZeroMartingale) {
  PartitionMartingale m(Vector::Zero(2));
  m.split(0, 0.3, Vector::Zero(2), Vector::Zero(2));
  const auto out = to_curve(m);
  for (const auto& p : out.curve.points) EXPECT_EQ(p, Vector::Zero(2));
}

TEST(ToCurve, RandomMartingalesStabilize) {
  Rng rng(1, "random_tree");
  for (int trial = 0; trial < 20; ++trial) {
    PartitionMartingale m(rng.normal_vector(3));
    std::vector<int> frontier = {0};
    for (int depth = 0; depth < 6; ++depth) {
      std::vector<int> next;
      for (int idx : frontier) {
        if (rng.uniform() < 0.2) continue;
        const auto& n = m.node(idx);
        const double b = n.a + n.width() * rng.uniform(0.1, 0.9);
        const Vector parent = n.value;
        const double wl = b - n.a, wr = n.c - b;
        const Vector l = parent + rng.normal_vector(3);
        const Vector r = (parent * (wl + wr) - l * wl) / wr;
        const int li = m.split(idx, b, l, r);
        next.push_back(li);
        next.push_back(li + 1);
      }
      frontier = next;
    }
    EXPECT_TRUE(validate_martingale(m, 0.0).is_martingale);
    const auto out = to_curve(m);
    EXPECT_TRUE(out.stabilized) << out.stabilization_error;
    // oracle: f at every atom endpoint equals the sum of value*width of the atoms to its left at any level
    for (const auto& n : m.nodes()) {
      Vector left = Vector::Zero(3);
      for (int li : m.leaves())
        if (m.node(li).c <= n.a) left += m.node(li).value * m.node(li).width();
      EXPECT_LE((out.curve.at(n.a) - left).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(FromCurve, AffineCurveHasNoDeviation) {
  Polyline p;
  p.times = {0.0, 1.0};
  p.points = {from_list({0.0, 0.0}), from_list({0.6, 0.8})};
  const auto out = from_curve(p, 0.1);
  EXPECT_TRUE(out.no_deviation);
  EXPECT_EQ(out.martingale.nodes().size(), 1u);
  EXPECT_LE((out.martingale.node(0).value - from_list({0.6, 0.8})).norm(), 1e-15);
}

TEST(FromCurve, StaircaseSplitsWithSeparation) {
  const auto f = staircase_polyline(8);
  FromCurveOptions opt;
  opt.p = 1.0;
  const auto out = from_curve(f, 0.4, opt);
  EXPECT_GE(out.martingale.depth(), 3);
  EXPECT_GT(out.min_edge_separation, 0.4);
  EXPECT_LE(out.max_width_ratio, 2 / 0.4 + 1e-9);
  EXPECT_TRUE(out.certified);
  const auto rep = validate_martingale(out.martingale, 0.4, 1.0);
  EXPECT_TRUE(rep.is_martingale) << rep.max_identity_error;
  EXPECT_TRUE(rep.is_separated);
  // the chosen split maximizes the closed-form deviation over the grid
  const auto& root = out.martingale.node(0);
  double best = -1;
  for (int i = 1; i < 256; ++i) best = std::max(best, staircase_deviation(8, 0, i / 256.0, 1));
  EXPECT_NEAR(staircase_deviation(8, 0, *root.b, 1), best, 1e-15);
}

TEST(FromCurve, RoundTripReproducesSplitEndpoints) {
  const auto f = staircase_polyline(8);
  FromCurveOptions opt;
  opt.p = 1.0;
  const auto out = from_curve(f, 0.4, opt);
  const auto back = to_curve(out.martingale, 1.0);
  for (const auto& n : out.martingale.nodes()) {
    EXPECT_LE((back.curve.at(n.a) - f.at(n.a)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((back.curve.at(n.c) - f.at(n.c)).cwiseAbs().maxCoeff(), 1e-12);
  }
  const auto again = from_curve(back.curve, 0.4, opt);
  EXPECT_GT(again.min_edge_separation, 0.4);
}

TEST(FromCurve, RejectsFastCurves) {
  Polyline p;
  p.times = {0.0, 1.0};
  p.points = {v1(0), v1(2)};
  EXPECT_THROW(from_curve(p, 0.1), UsageError);
}

TEST(Obstruction, RademacherGivesQuarter) {
  const auto rep = frechet_obstruction(rademacher(), 0.25, 1.0);
  EXPECT_EQ(rep.eps_lower_bound, 0.25);
  EXPECT_EQ(rep.level, 0);
}

TEST(Obstruction, ZeroMartingaleGivesZero) {
  PartitionMartingale m(v1(0.0));
  m.split(0, 0.5, v1(0.0), v1(0.0));
  EXPECT_EQ(frechet_obstruction(m, 0.7, 1.0).eps_lower_bound, 0.0);
}

TEST(Obstruction, TooShallowIsUsageError) {
  EXPECT_THROW(frechet_obstruction(rademacher(), 0.25, 0.5), UsageError);
  EXPECT_THROW(frechet_obstruction(PartitionMartingale(v1(0.0)), 0.25, 1.0), UsageError);
}

TEST(Obstruction, StaircaseMartingaleAtRandomPoints) {
  FromCurveOptions opt;
  opt.p = 1.0;
  const auto out = from_curve(staircase_polyline(8), 0.4, opt);
  Rng rng(2, "x0");
  for (int i = 0; i < 100; ++i) {
    const auto rep = frechet_obstruction(out.martingale, rng.uniform(), 1.0, 1.0);
    EXPECT_GE(rep.eps_lower_bound, 0.1);
  }
}
