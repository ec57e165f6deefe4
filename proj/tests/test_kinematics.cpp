#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "safelayer/kinematics.hpp"

using namespace safelayer;
using Eigen::Vector2d;
using Eigen::Vector3d;

namespace {

SerialChain planar_chain(std::vector<double> link_lengths) {
  std::vector<RevoluteJoint> joints;
  double prev = 0.0;
  for (double len : link_lengths) {
    RevoluteJoint j;
    j.origin = Transform::Identity();
    j.origin.translation() = Vector3(prev, 0, 0);
    j.axis = Vector3::UnitZ();
    joints.push_back(j);
    prev = len;
  }
  return SerialChain(Transform::Identity(), joints);
}

Vector random_q(std::mt19937_64& rng, const SerialChain& c) {
  Vector q(c.dof());
  for (int i = 0; i < c.dof(); ++i) {
    q[i] = std::uniform_real_distribution<double>(c.joints()[i].lower, c.joints()[i].upper)(rng);
  }
  return q;
}

}  // namespace

TEST(ForwardPoint, OneLinkIdentityAndQuarterTurn) {
  const SerialChain c = planar_chain({1.0});
  const Attachment tip{1, Vector3(1, 0, 0)};
  EXPECT_TRUE(forward_point(c, Vector::Zero(1), tip).isApprox(Vector3(1, 0, 0), 1e-15));
  const Vector3 p = forward_point(c, Vector::Constant(1, M_PI / 2), tip);
  EXPECT_NEAR(p.x(), 0.0, 1e-15);
  EXPECT_NEAR(p.y(), 1.0, 1e-15);
  EXPECT_NEAR(p.z(), 0.0, 1e-15);
}

TEST(ForwardPoint, MatchesHomogeneousProductOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const SerialChain c = oracle::random_chain(rng, 3);
    const Vector q = random_q(rng, c);
    for (int link = 0; link <= 3; ++link) {
      const Vector3 off(0.1 * link, -0.2, 0.05);
      const Vector3 ref = oracle::fk_point(c, q, link, off);
      EXPECT_LE((forward_point(c, q, {link, off}) - ref).norm(), 1e-12);
    }
  }
}

TEST(ForwardPoint, InvalidAttachmentThrows) {
  const SerialChain c = planar_chain({1.0, 1.0});
  EXPECT_THROW(forward_point(c, Vector::Zero(2), {3, Vector3::Zero()}), DomainError);
  EXPECT_THROW(forward_point(c, Vector::Zero(2), {-1, Vector3::Zero()}), DomainError);
}

TEST(SerialChainTest, RejectsBadDescriptions) {
  RevoluteJoint j;
  j.axis = Vector3(1, 1, 0);  // not unit
  EXPECT_THROW(SerialChain(Transform::Identity(), {j}), DomainError);
  j.axis = Vector3::UnitZ();
  j.lower = 1.0;
  j.upper = -1.0;
  EXPECT_THROW(SerialChain(Transform::Identity(), {j}), DomainError);
  j.lower = -1.0;
  j.upper = 1.0;
  j.origin.linear() = Matrix3::Identity() * 2.0;
  EXPECT_THROW(SerialChain(Transform::Identity(), {j}), DomainError);
}

TEST(PointJacobian, OneLinkColumn) {
  const SerialChain c = planar_chain({1.0});
  const Matrix j = point_jacobian(c, Vector::Zero(1), {1, Vector3(1, 0, 0)});
  EXPECT_TRUE(j.col(0).isApprox(Vector3(0, 1, 0), 1e-15));
}

TEST(PointJacobian, BaseAttachmentIsZero) {
  std::mt19937_64 rng(3);
  const SerialChain c = oracle::random_chain(rng, 4);
  EXPECT_EQ(point_jacobian(c, random_q(rng, c), {0, Vector3(0.3, 0.1, 0)}).norm(), 0.0);
}

TEST(PointJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 6;
    const SerialChain c = oracle::random_chain(rng, n);
    const Vector q = random_q(rng, c);
    const int link = std::uniform_int_distribution<int>(1, n)(rng);
    const Attachment a{link, Vector3(0.2, -0.1, 0.3)};
    const Matrix fd = oracle::fd_jacobian(
        [&](const Vector& x) -> Vector { return oracle::fk_point(c, x, a.link_index, a.local_offset); },
        q);
    const Matrix j = point_jacobian(c, q, a);
    worst = std::max(worst, oracle::rel_err(j, fd));
    // Distal columns vanish.
    for (int col = link; col < n; ++col) EXPECT_EQ(j.col(col).norm(), 0.0);
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(SpherePositions, OrderAndPlacement) {
  const SerialChain c = planar_chain({1.0, 1.0});
  SphereCover cover;
  cover.spheres = {{{0, Vector3::Zero()}, 0.1}, {{1, Vector3(1, 0, 0)}, 0.2},
                   {{2, Vector3(0.5, 0, 0)}, 0.3}};
  const Vector q = Vector2d(M_PI / 2, 0.0);
  const auto placed = sphere_positions(c, q, cover);
  ASSERT_EQ(placed.size(), 3u);
  EXPECT_TRUE(placed[0].center.isZero());
  EXPECT_LE((placed[1].center - Vector3(0, 1, 0)).norm(), 1e-12);
  EXPECT_LE((placed[2].center - Vector3(0, 1.5, 0)).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(placed[2].radius, 0.3);
}

TEST(DampedPinvIk, ZeroInputGivesZero) {
  const SerialChain c = planar_chain({0.5, 0.4, 0.3});
  const Vector qd = damped_pinv_ik(c, Vector3d(0.1, 0.2, 0.3), Vector::Zero(2), {3, Vector3(0.3, 0, 0)}, 0.05);
  EXPECT_EQ(qd.norm(), 0.0);
}

TEST(DampedPinvIk, TwoLinkExactSolution) {
  const SerialChain c = planar_chain({1.0, 1.0});
  const Attachment tip{2, Vector3(1, 0, 0)};
  const Vector q = Vector2d(0.0, M_PI / 2);
  const Vector v = Vector2d(0.0, 0.1);
  const Vector qd = damped_pinv_ik(c, q, v, tip, 0.0);
  const Vector achieved = point_jacobian(c, q, tip).topRows(2) * qd;
  EXPECT_LE((achieved - v).norm(), 1e-9);
}

TEST(DampedPinvIk, ShrinksMonotonicallyWithDamping) {
  const SerialChain c = planar_chain({0.5, 0.4, 0.3});
  const Attachment tip{3, Vector3(0.3, 0, 0)};
  const Vector q = Vector3d(0.3, 0.7, -0.4);
  const Vector v = Vector3d(0.2, -0.1, 0.0).head(2);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {1.0, 10.0, 100.0, 1e3}) {
    const double n = damped_pinv_ik(c, q, v, tip, lambda).norm();
    EXPECT_LT(n, prev);
    prev = n;
  }
  const Matrix j = point_jacobian(c, q, tip).topRows(2);
  EXPECT_LE(prev, (j.transpose() * v).norm() / (1e3 * 1e3) * 1.0001);
}

TEST(DampedPinvIk, SingularUndampedThrows) {
  const SerialChain c = planar_chain({1.0, 1.0});
  // Fully stretched arm: the two x-y rows are dependent.
  EXPECT_THROW(damped_pinv_ik(c, Vector::Zero(2), Vector2d(0.1, 0.0), {2, Vector3(1, 0, 0)}, 0.0),
               RankDeficiencyError);
}

TEST(DampedPinvIk, PermutationEquivariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix j(3, 5);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 5; ++c) j(r, c) = n(rng);
  const Vector v = Vector3d(0.1, -0.3, 0.2);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  const Vector a = damped_pinv(j, v, 0.1);
  const Vector b = damped_pinv(j * perm, v, 0.1);
  EXPECT_LE((perm * b - a).norm(), 1e-12);
}

TEST(Integrate, EulerArithmetic) {
  const JointState s0 = JointState::at_rest(Vector::Zero(1));
  const JointState s1 = integrate(s0, Vector::Constant(1, 1.0), 0.02);
  EXPECT_DOUBLE_EQ(s1.q[0], 0.02);
  EXPECT_DOUBLE_EQ(s1.qdot[0], 1.0);
  EXPECT_DOUBLE_EQ(s1.t, 0.02);
  EXPECT_EQ(integrate(s1, Vector::Zero(1), 0.1).q[0], s1.q[0]);

  const Vector cmd = Vector2d(0.5, -0.25);
  const JointState full = integrate(JointState::at_rest(Vector2d(0.1, 0.2)), cmd, 0.5);
  const JointState half = integrate(integrate(JointState::at_rest(Vector2d(0.1, 0.2)), cmd, 0.25), cmd, 0.25);
  EXPECT_LE((full.q - half.q).norm(), 1e-15);
  EXPECT_THROW(integrate(s0, Vector::Zero(1), 0.0), DomainError);
}

TEST(TransformComposition, StaysOrthonormal) {
  std::mt19937_64 rng(9);
  Transform t = Transform::Identity();
  for (int i = 0; i < 10000; ++i) {
    Transform step = Transform::Identity();
    step.linear() = oracle::random_rotation(rng);
    t = t * step;
  }
  EXPECT_TRUE(is_rotation(t.linear(), 1e-9));
}
