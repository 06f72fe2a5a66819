#include "lipquot/uaap.hpp"

#include <gtest/gtest.h>

using namespace lipquot;

namespace {

double sawtooth(double t) {
  const double n = std::floor(t);
  const double sign = std::fmod(std::abs(n), 2.0) == 0.0 ? 1.0 : -1.0;
  return sign * (1.0 - 2.0 * (t - n));
}

// Independent oracle: best affine error over fresh samples of the certificate ball.
double oracle_error(const NormedSpace& space, const ApproxCertificate& cert,
                    const std::function<double(const Vector&)>& f, std::uint64_t seed) {
  Rng rng(seed, "oracle_ball");
  std::vector<Vector> xs;
  std::vector<double> fs;
  for (int i = 0; i < 1000; ++i) {
    xs.push_back(sample_ball(lp_norm_fn(space.p()), cert.ball.center, cert.ball.radius, rng));
    fs.push_back(f(xs.back()));
  }
  return minimax_affine_fit(xs, fs).error;
}

}  // namespace

TEST(UaapK, DefinitionHolds) {
  for (double eps : {0.05, 0.1, 0.3}) {
    for (double delta : {0.05, 0.2, 0.45}) {
      const int k = uaap_k(eps, delta);
      EXPECT_LE(std::pow(1 + delta * eps, k - 1) * eps, 1.0);
      EXPECT_GT(std::pow(1 + delta * eps, k) * eps, 1.0);
    }
  }
}

TEST(Uaap, LinearFunctionRecoveredExactly) {
  const NormedSpace s(3, 2.0);
  const Vector a = from_list({0.3, -0.5, 0.2});
  const auto f = LipschitzFunction::scalar([a](const Vector& x) { return a.dot(x) + 0.7; }, {Vector::Zero(3), 1.0},
                                           a.norm());
  const auto cert = uaap_search_scalar(s, f, 0.1);
  EXPECT_LE(cert.sampled_error, 1e-9);
  EXPECT_LE((cert.map.linear.row(0).transpose() - a).norm(), 1e-8);
  EXPECT_NEAR(cert.map.offset[0], 0.7, 1e-8);
}

TEST(Uaap, EuclideanNormAvoidsOrigin) {
  const NormedSpace s(3, 2.0);
  const auto f = LipschitzFunction::scalar([](const Vector& x) { return x.norm(); }, {Vector::Zero(3), 1.0}, 1.0);
  const auto cert = uaap_search_scalar(s, f, 0.1);
  EXPECT_FALSE(cert.constant_branch);
  EXPECT_GT(cert.ball.center.norm(), cert.ball.radius);
  EXPECT_NEAR(cert.L, 1.0, 0.05);
  EXPECT_LE(cert.sampled_error, 0.6 * cert.ball.radius);
  EXPECT_LE(cert.construction_error, 0.6 * cert.ball.radius * 1.1);
  EXPECT_LE(oracle_error(s, cert, [](const Vector& x) { return x.norm(); }, 5), cert.sampled_error + 1e-9);
  EXPECT_GE(cert.ball.radius, cert.radius_floor);
  // certificate ball stays inside the domain
  EXPECT_LE(cert.ball.center.norm() + cert.ball.radius, 1.0 + 1e-12);
}

TEST(Uaap, SawtoothInThePlane) {
  const NormedSpace s(2, 2.0);
  const auto saw = [](const Vector& x) { return sawtooth(x[0]); };
  const auto f = LipschitzFunction::scalar(saw, {Vector::Zero(2), 1.0}, 2.0);
  const auto cert = uaap_search_scalar(s, f, 0.3);
  EXPECT_FALSE(cert.constant_branch);
  EXPECT_GE(cert.ball.radius, cert.radius_floor);
  EXPECT_LE(oracle_error(s, cert, saw, 6), 6 * 0.3 * cert.ball.radius);
}

TEST(Uaap, ConstantBranchForSmallOscillation) {
  const NormedSpace s(2, 2.0);
  const auto f = LipschitzFunction::scalar([](const Vector& x) { return 0.05 * std::sin(x[0]); },
                                           {Vector::Zero(2), 1.0}, 1.0);
  const auto cert = uaap_search_scalar(s, f, 0.1);
  EXPECT_TRUE(cert.constant_branch);
  EXPECT_DOUBLE_EQ(cert.ball.radius, 1.0);
  EXPECT_LE(cert.sampled_error, 0.2);
}

TEST(Uaap, L4SpaceKinkedFunction) {
  const NormedSpace s(2, 4.0);
  const auto fn = [](const Vector& x) { return 0.5 * std::abs(x[0] - 0.1) + 0.3 * std::sin(2 * x[1]); };
  const auto f = LipschitzFunction::scalar(fn, {Vector::Zero(2), 1.0}, 1.2);
  const auto cert = uaap_search_scalar(s, f, 0.2);
  EXPECT_LE(cert.sampled_error, cert.bound_claim * 1.1);
  EXPECT_LE(oracle_error(s, cert, fn, 2), cert.sampled_error + 1e-9);
  ASSERT_TRUE(cert.z_star.has_value());
  EXPECT_NEAR(cert.z_star->dual_norm(), 1.0, 1e-12);
}

TEST(Uaap, PreconditionsRejected) {
  const auto f = LipschitzFunction::scalar([](const Vector& x) { return x[0]; }, {Vector::Zero(2), 1.0}, 1.0);
  EXPECT_THROW(uaap_search_scalar(NormedSpace(2, 1.0), f, 0.1), UsageError);
  EXPECT_THROW(uaap_search_scalar(NormedSpace(2, 2.0), f, 0.7), UsageError);
  EXPECT_THROW(uaap_search_scalar(NormedSpace(3, 2.0), f, 0.1), UsageError);
}

TEST(Uaap, RescalingEquivarianceIsExact) {
  const NormedSpace s(2, 2.0);
  const Vector c0 = from_list({0.25, -0.5});
  const auto base = [](const Vector& x) { return std::abs(x[0]) * 0.6 + 0.4 * std::cos(x[1] * 2); };
  const auto cert = uaap_search_scalar(s, LipschitzFunction::scalar(base, {c0, 1.0}, 1.4), 0.1);
  for (double sc : {0.5, 2.0}) {
    const auto scaled = [base, sc](const Vector& x) { return sc * base(x / sc); };
    const auto c2 = uaap_search_scalar(s, LipschitzFunction::scalar(scaled, {Vector(sc * c0), sc}, 1.4), 0.1);
    EXPECT_EQ(c2.ball.radius, sc * cert.ball.radius);
    EXPECT_EQ((c2.ball.center - sc * cert.ball.center).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(c2.sampled_error, sc * cert.sampled_error);
  }
}

TEST(UaapVector, IdentityExact) {
  const NormedSpace s(2, 2.0);
  const LipschitzFunction id([](const Vector& x) { return x; }, 2, {Vector::Zero(2), 1.0}, 1.0);
  const auto cert = uaap_search_vector(s, id, 0.2, 2);
  EXPECT_LE(cert.sampled_error, 1e-9);
}

TEST(UaapVector, RandomAffineExact) {
  const NormedSpace s(3, 2.0);
  const Matrix a = Matrix::Random(2, 3) * 0.4;
  const Vector b = Vector::Random(2);
  const LipschitzFunction f([a, b](const Vector& x) { return Vector(a * x + b); }, 2, {Vector::Zero(3), 1.0}, 1.0);
  const auto cert = uaap_search_vector(s, f, 0.2, 2);
  EXPECT_LE(cert.sampled_error, 1e-9);
  EXPECT_LE((cert.map.linear - a).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(UaapVector, AbsoluteValuesAvoidBothAxes) {
  const NormedSpace s(2, 2.0);
  const LipschitzFunction f([](const Vector& x) { return Vector(x.cwiseAbs()); }, 2, {Vector::Zero(2), 1.0}, 1.0);
  const auto cert = uaap_search_vector(s, f, 0.3, 2);
  EXPECT_GT(std::abs(cert.ball.center[0]), cert.ball.radius);
  EXPECT_GT(std::abs(cert.ball.center[1]), cert.ball.radius);
  EXPECT_LE(cert.sampled_error, 0.3 * cert.ball.radius);
  // oracle: per-coordinate minimax error on fresh samples of the final ball
  for (int i = 0; i < 2; ++i)
    EXPECT_LE(oracle_error(s, cert, [i](const Vector& x) { return std::abs(x[i]); }, 9 + i),
              0.3 * cert.ball.radius / 2 + 1e-12);
}
