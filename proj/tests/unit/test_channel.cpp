#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "hris/channel.hpp"

using namespace hris;

namespace {

Geometry default_geometry(int users = 2, int n = 20, int m = 20) {
  Geometry g;
  g.ris_elements = n;
  g.ehs_elements = m;
  g.user_pos = place_users_equal(users, Vec3(0, 0, 0), 0.5);
  return g;
}

void expect_cnear(Complex a, Complex b, double tol) {
  EXPECT_NEAR(a.real(), b.real(), tol);
  EXPECT_NEAR(a.imag(), b.imag(), tol);
}

}  // namespace

TEST(PathLoss, UnitDistanceEqualsReference) { EXPECT_NEAR(path_loss(-20.0, 1.0, 2.2), 0.01, 1e-15); }

TEST(PathLoss, DirectLinkAtTwentyMeters) {
  EXPECT_NEAR(path_loss(-30.0, 20.0, 3.2) / 6.86600339566323e-8, 1.0, 1e-12);
}

TEST(PathLoss, RisLinkAtTenMeters) {
  EXPECT_NEAR(path_loss(-20.0, 10.0, 2.2) / 6.30957344480193e-5, 1.0, 1e-12);
}

TEST(PathLoss, RejectsNonPositiveDistance) {
  EXPECT_THROW(path_loss(-20.0, 0.0, 2.0), DomainError);
  EXPECT_THROW(path_loss(-20.0, -1.0, 2.0), DomainError);
}

TEST(SteeringVector, ZeroAngleIsAllOnes) {
  const CVector v = steering_vector(3, 0.5, 0.0);
  for (int k = 0; k < 3; ++k) expect_cnear(v(k), {1.0, 0.0}, 1e-15);
}

TEST(SteeringVector, HalfWavelengthEndfire) {
  const CVector v = steering_vector(3, 0.5, 1.0);
  expect_cnear(v(0), {1.0, 0.0}, 1e-15);
  expect_cnear(v(1), {-1.0, 0.0}, 1e-15);
  expect_cnear(v(2), {1.0, 0.0}, 1e-15);
}

TEST(SteeringVector, QuarterWavelength) {
  const CVector v = steering_vector(2, 0.25, 1.0);
  expect_cnear(v(0), {1.0, 0.0}, 1e-15);
  expect_cnear(v(1), {0.0, -1.0}, 1e-15);
}

TEST(SteeringVector, UnitModulusEntries) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const CVector v = steering_vector(17, rng.uniform(0.1, 2.0), rng.uniform(-1.0, 1.0));
    for (int k = 0; k < v.size(); ++k) EXPECT_NEAR(std::abs(v(k)), 1.0, 1e-15);
  }
}

TEST(AngleParam, CollinearOrthogonalAnticollinear) {
  const Vec3 o(1, 2, 3), x(1, 0, 0);
  EXPECT_DOUBLE_EQ(angle_param_from_geometry(o, x, o + Vec3(4, 0, 0)), 1.0);
  EXPECT_NEAR(angle_param_from_geometry(o, x, o + Vec3(0, 2, 0)), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(angle_param_from_geometry(o, x, o - Vec3(7, 0, 0)), -1.0);
}

TEST(AngleParam, DegenerateInputsThrow) {
  EXPECT_THROW(angle_param_from_geometry(Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(1, 0, 0)), DomainError);
  EXPECT_THROW(angle_param_from_geometry(Vec3(1, 1, 1), Vec3(1, 0, 0), Vec3(1, 1, 1)), DomainError);
}

TEST(Rayleigh, ZeroGainIsZero) {
  Rng rng(1);
  EXPECT_EQ(sample_rayleigh(0.0, rng), Complex(0.0, 0.0));
}

TEST(Rayleigh, PowerMatchesGain) {
  for (double gain : {1.0, 4.0}) {
    Rng rng(11);
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += std::norm(sample_rayleigh(gain, rng));
    EXPECT_NEAR(acc / n / gain, 1.0, 0.03) << "gain " << gain;
  }
}

TEST(Rayleigh, NegativeGainThrows) {
  Rng rng(1);
  EXPECT_THROW(sample_rayleigh(-1.0, rng), DomainError);
}

TEST(Rician, LosOnlyLimitIsDeterministic) {
  Rng rng(5);
  const CVector los = steering_vector(4, 0.5, 0.3);
  const CVector h = sample_rician(2.5, kLosOnlyRicianK, los, rng);
  for (int k = 0; k < 4; ++k) {
    EXPECT_LT(std::abs(h(k) - std::sqrt(2.5) * los(k)), 1e-4 * std::sqrt(2.5));
  }
}

TEST(Rician, RayleighCaseMatchesGain) {
  Rng rng(6);
  const CVector los = steering_vector(3, 0.5, 0.7);
  Eigen::VectorXd power = Eigen::VectorXd::Zero(3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) power += sample_rician(0.3, 0.0, los, rng).cwiseAbs2();
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(power(k) / n / 0.3, 1.0, 0.03);
}

TEST(Rician, KTwoPowerAndMean) {
  Rng rng(7);
  const double gain = 2.0, kf = 2.0;
  const CVector los = steering_vector(2, 0.5, 0.4);
  CVector mean = CVector::Zero(2);
  Eigen::VectorXd power = Eigen::VectorXd::Zero(2);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const CVector h = sample_rician(gain, kf, los, rng);
    mean += h;
    power += h.cwiseAbs2();
  }
  mean /= n;
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(power(k) / n / gain, 1.0, 0.03);
    EXPECT_NEAR(std::abs(mean(k)) / std::sqrt(gain * kf / (kf + 1.0)), 1.0, 0.03);
  }
}

TEST(ChannelSet, Shapes) {
  Rng rng(1);
  const ChannelSet cs = sample_channel_set(default_geometry(2, 20, 20), LinkSet{}, rng);
  EXPECT_EQ(cs.h_ub.size(), 2);
  EXPECT_EQ(cs.h_ur.rows(), 2);
  EXPECT_EQ(cs.h_ur.cols(), 20);
  EXPECT_EQ(cs.h_rb.size(), 20);
  EXPECT_EQ(cs.h_es.size(), 20);
}

TEST(ChannelSet, SameSeedSameDraw) {
  const Geometry g = default_geometry();
  Rng r1(99), r2(99);
  EXPECT_TRUE(sample_channel_set(g, LinkSet{}, r1) == sample_channel_set(g, LinkSet{}, r2));
  Rng r3(100);
  Rng r4(99);
  EXPECT_FALSE(sample_channel_set(g, LinkSet{}, r3) == sample_channel_set(g, LinkSet{}, r4));
}

TEST(ChannelSet, DirectLinkDistanceScaling) {
  Geometry g = default_geometry(2, 2, 2);
  g.bs_pos = Vec3(0, 0, 0);
  g.user_pos = {Vec3(20, 0, 0), Vec3(5, 0, 0)};
  g.ris_pos = Vec3(0, 10, 0);
  Rng rng(21);
  double far = 0.0, near = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const ChannelSet cs = sample_channel_set(g, LinkSet{}, rng);
    far += std::norm(cs.h_ub(0));
    near += std::norm(cs.h_ub(1));
  }
  EXPECT_NEAR((far / near) / std::pow(20.0 / 5.0, -3.2), 1.0, 0.05);
}

TEST(ChannelSet, InvalidGeometryThrows) {
  Geometry g = default_geometry();
  Rng rng(1);
  g.user_pos.clear();
  EXPECT_THROW(sample_channel_set(g, LinkSet{}, rng), DomainError);
  g = default_geometry();
  g.ris_elements = 0;
  EXPECT_THROW(sample_channel_set(g, LinkSet{}, rng), DomainError);
  g = default_geometry();
  g.es_pos = g.ehs_pos;
  EXPECT_THROW(sample_channel_set(g, LinkSet{}, rng), DomainError);
}

TEST(UserPlacement, EqualAnglesOnCircle) {
  const auto u = place_users_equal(4, Vec3(1, 1, 0), 0.5);
  ASSERT_EQ(u.size(), 4u);
  for (const auto& p : u) {
    EXPECT_NEAR((p - Vec3(1, 1, 0)).norm(), 0.5, 1e-12);
    EXPECT_NEAR(p.z(), 0.0, 1e-15);
  }
  EXPECT_NEAR((u[0] - u[1]).norm(), (u[1] - u[2]).norm(), 1e-12);
}

TEST(UserPlacement, RandomAnglesStayOnCircle) {
  Rng rng(2);
  for (const auto& p : place_users_random(5, Vec3(0, 0, 0), 0.5, rng)) EXPECT_NEAR(p.norm(), 0.5, 1e-12);
}
