#include "lipquot/lipfn.hpp"

#include <gtest/gtest.h>

using namespace lipquot;

namespace {

double sawtooth(double t) {
  const double n = std::floor(t);
  const double sign = std::fmod(std::abs(n), 2.0) == 0.0 ? 1.0 : -1.0;
  return sign * (1.0 - 2.0 * (t - n));
}

LipschitzFunction saw_fn(double radius = 3.0) {
  return LipschitzFunction::scalar([](const Vector& x) { return sawtooth(x[0]); }, {Vector::Zero(1), radius}, 2.0);
}

// Oracle: brute force over a grid of pairs at distance >= t.
double grid_lip_1d(double (*f)(double), double lo, double hi, double h, double t) {
  const int n = static_cast<int>(std::round((hi - lo) / h));
  std::vector<double> v(n + 1);
  for (int i = 0; i <= n; ++i) v[i] = f(lo + i * h);
  double best = 0.0;
  const int gap = std::max(1, static_cast<int>(std::ceil(t / h - 1e-9)));
  for (int i = 0; i <= n; ++i)
    for (int j = i + gap; j <= n; ++j) best = std::max(best, std::abs(v[j] - v[i]) / ((j - i) * h));
  return best;
}

}  // namespace

TEST(Sawtooth, ReferenceValues) {
  EXPECT_DOUBLE_EQ(sawtooth(0), 1);
  EXPECT_DOUBLE_EQ(sawtooth(1), -1);
  EXPECT_DOUBLE_EQ(sawtooth(-1), -1);
  EXPECT_DOUBLE_EQ(sawtooth(0.5), 0);
}

TEST(LipAtScale, SawtoothGlobalSlopeIsTwo) {
  // exact segment enumeration: every piece has slope +-2
  double slope = 0.0;
  for (int n = -3; n < 3; ++n) slope = std::max(slope, std::abs(sawtooth(n + 1 - 1e-12) - sawtooth(n)));
  EXPECT_NEAR(slope, 2.0, 1e-9);
  EXPECT_NEAR(lip_at_scale(saw_fn(), NormedSpace::euclidean(1), 0.0, 4000, 1), 2.0, 1e-9);
}

TEST(LipAtScale, SawtoothAtScaleTwoIsAtMostOne) {
  const double est = lip_at_scale(saw_fn(), NormedSpace::euclidean(1), 2.0, 4000, 1);
  const double grid = grid_lip_1d(sawtooth, -3, 3, 1e-3, 2.0);
  EXPECT_LE(est, 1.0 + 1e-6);
  EXPECT_LE(grid, 1.0 + 1e-9);
  // the sampled estimate is a lower bound that should track the brute-force value closely
  EXPECT_LE(est, grid + 1e-6);
  EXPECT_GE(est, grid - 1e-3);
}

TEST(LipAtScale, EuclideanNormOnUnitDisc) {
  const auto f = LipschitzFunction::scalar([](const Vector& x) { return x.norm(); }, {Vector::Zero(2), 1.0}, 1.0);
  for (double t : {0.0, 0.5, 1.0}) EXPECT_NEAR(lip_at_scale(f, NormedSpace::euclidean(2), t, 4000, 3), 1.0, 1e-3);
  // beyond t = 1 the ratio is capped by (2 - t)/t along diameters' best case
  EXPECT_LE(lip_at_scale(f, NormedSpace::euclidean(2), 1.5, 4000, 3), 1.0 / 1.5 * 0.5 + 1e-9);
}

TEST(LipAtScale, TooLargeScaleRejected) {
  EXPECT_THROW(lip_at_scale(saw_fn(), NormedSpace::euclidean(1), 6.5, 100, 1), UsageError);
  EXPECT_THROW(lip_at_scale(saw_fn(), NormedSpace::euclidean(1), 0.0, 0, 1), UsageError);
}

TEST(LipAtScale, DeterministicGivenSeed) {
  const auto f = LipschitzFunction::scalar([](const Vector& x) { return std::sin(3 * x[0]) * x[1]; },
                                           {Vector::Zero(2), 1.0});
  const NormedSpace s(2, 3.0);
  EXPECT_EQ(lip_at_scale(f, s, 0.2, 3000, 9), lip_at_scale(f, s, 0.2, 3000, 9));
}

TEST(LipAtScale, MonotoneInScaleAndBudget) {
  const auto f = LipschitzFunction::scalar(
      [](const Vector& x) { return std::sin(4 * x[0]) + std::abs(x[1] - 0.2) - 0.5 * x[2] * x[2]; },
      {Vector::Zero(3), 1.0});
  const NormedSpace s(3, 2.0);
  const auto prof = scale_profile(f, s, {0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.2, 1.6, 1.99}, 5000, 4);
  for (std::size_t i = 1; i < prof.estimates.size(); ++i) EXPECT_LE(prof.estimates[i], prof.estimates[i - 1] + 1e-6);
  for (double t : {0.0, 0.3, 1.0}) {
    double prev = 0.0;
    for (int budget : {300, 600, 1200, 2400, 4800}) {
      const double e = lip_at_scale(f, s, t, budget, 4);
      EXPECT_GE(e, prev - 1e-9);
      prev = e;
    }
  }
}

TEST(LipAtScale, NeverExceedsDeclaredBound) {
  Rng rng(7, "declared");
  for (int inst = 0; inst < 10; ++inst) {
    const Matrix a = Matrix::Random(1, 3);
    const double lip = a.norm();
    const auto f = LipschitzFunction::scalar([a](const Vector& x) { return std::abs((a * x)(0)) - 0.3; },
                                             {rng.normal_vector(3), 2.0}, lip);
    EXPECT_LE(lip_at_scale(f, NormedSpace::euclidean(3), 0.0, 2000, inst), lip * (1 + 1e-9));
    EXPECT_GE(lip_at_scale(f, NormedSpace::euclidean(3), 0.0, 2000, inst), lip * 0.99);
  }
}

TEST(LargeDistance, IdentityIsOneOne) {
  const LipschitzFunction id([](const Vector& x) { return x; }, 2, {Vector::Zero(2), 2.0}, 1.0);
  const auto c = large_distance_constants(id, NormedSpace::euclidean(2), 0.5, 2000, 1);
  EXPECT_NEAR(c.c_up, 1.0, 1e-3);
  EXPECT_NEAR(c.c_down, 1.0, 1e-3);
}

TEST(LargeDistance, ConstantIsZeroAndUnbounded) {
  const LipschitzFunction k([](const Vector&) { return from_list({1.0, 2.0}); }, 2, {Vector::Zero(2), 2.0});
  const auto c = large_distance_constants(k, NormedSpace::euclidean(2), 0.5, 500, 1);
  EXPECT_EQ(c.c_up, 0.0);
  EXPECT_TRUE(std::isinf(c.c_down));
}

TEST(LargeDistance, FoldingMapFinite) {
  const LipschitzFunction fold(
      [](const Vector& z) {
        const double r = z.norm();
        if (r == 0.0) return Vector(Vector::Zero(2));
        return from_list({(z[0] * z[0] - z[1] * z[1]) / r, 2 * z[0] * z[1] / r});
      },
      2, {Vector::Zero(2), 2.0}, 2.0);
  const auto c = large_distance_constants(fold, NormedSpace::euclidean(2), 0.5, 4000, 2);
  EXPECT_LE(c.c_up, 2.0 + 1e-2);
  EXPECT_GT(c.c_up, 1.5);
  EXPECT_TRUE(std::isfinite(c.c_down));
}
