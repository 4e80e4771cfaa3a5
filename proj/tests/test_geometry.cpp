#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lidarseg/geometry.hpp"
#include "support.hpp"

using namespace lidarseg;
using lidarseg::testing::random_transform;

namespace {

constexpr double kPi = std::numbers::pi;

CameraIntrinsics cam128() { return CameraIntrinsics{100.0, 100.0, 64.0, 64.0, 128, 128}; }

RigidTransform cam_identity() { return RigidTransform::identity("lidar", "camera"); }

double max_abs_diff(const Mat3& a, const Mat3& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Compose, IdentityOnTheRightIsNeutral) {
  std::mt19937_64 rng(11);
  const auto t = random_transform(rng, "a", "b");
  const auto r = compose(t, RigidTransform::identity("a"));
  EXPECT_EQ(r.rotation(), t.rotation());
  EXPECT_EQ(r.translation(), t.translation());
  EXPECT_EQ(r.source_frame(), "a");
  EXPECT_EQ(r.target_frame(), "b");
}

TEST(Compose, WithInverseIsIdentity) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 50; ++i) {
    const auto t = random_transform(rng, "a", "b");
    const auto r = compose(t, inverse(t));
    EXPECT_LT(max_abs_diff(r.rotation(), Mat3::Identity()), 1e-9);
    EXPECT_LT(r.translation().cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(r.source_frame(), "b");
    EXPECT_EQ(r.target_frame(), "b");
  }
}

TEST(Compose, QuarterTurnsByHand) {
  // Outer: Rz(90) then +x; inner: Rz(90). Hand product gives Rz(180), t unchanged.
  const RigidTransform a(rot_z(kPi / 2), Vec3(1, 0, 0), "m", "w");
  const RigidTransform b(rot_z(kPi / 2), Vec3::Zero(), "s", "m");
  const auto r = compose(a, b);
  Mat3 expected;
  expected << -1, 0, 0, 0, -1, 0, 0, 0, 1;
  EXPECT_LT(max_abs_diff(r.rotation(), expected), 1e-12);
  EXPECT_LT((r.translation() - Vec3(1, 0, 0)).norm(), 1e-12);
  EXPECT_EQ(r.source_frame(), "s");
  EXPECT_EQ(r.target_frame(), "w");
}

TEST(Compose, FrameMismatchNamesBothFrames) {
  const RigidTransform a = RigidTransform::identity("lidar", "camera");
  const RigidTransform b = RigidTransform::identity("world", "vehicle");
  try {
    (void)compose(a, b);
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("lidar"), std::string::npos);
    EXPECT_NE(msg.find("vehicle"), std::string::npos);
  }
}

TEST(Compose, AssociativeOnRandomTransforms) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_transform(rng, "c", "d");
    const auto b = random_transform(rng, "b", "c");
    const auto c = random_transform(rng, "a", "b");
    const auto l = compose(compose(a, b), c);
    const auto r = compose(a, compose(b, c));
    EXPECT_LT(max_abs_diff(l.rotation(), r.rotation()), 1e-9);
    EXPECT_LT((l.translation() - r.translation()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NO_THROW(check_rotation(l.rotation()));
  }
}

TEST(RigidTransform, RejectsNonOrthonormalRotation) {
  Mat3 r = Mat3::Identity();
  r(0, 0) = 1.0 + 1e-4;
  EXPECT_THROW(RigidTransform(r, Vec3::Zero(), "a", "b"), std::invalid_argument);
  Mat3 reflection = Mat3::Identity();
  reflection(2, 2) = -1.0;
  EXPECT_THROW(RigidTransform(reflection, Vec3::Zero(), "a", "b"), std::invalid_argument);
  Mat3 tiny = Mat3::Identity();
  tiny(0, 1) = 1e-8;
  EXPECT_NO_THROW(RigidTransform(tiny, Vec3::Zero(), "a", "b"));
}

TEST(ProjectPoint, OpticalAxisHitsPrincipalPoint) {
  const auto px = project_point({0, 0, 5}, cam128(), cam_identity());
  ASSERT_TRUE(px);
  EXPECT_EQ(*px, (PixelCoord{64, 64}));
}

TEST(ProjectPoint, LateralOffsetByHand) {
  // u = round(100 * 1 / 5 + 64) = 84
  const auto px = project_point({1, 0, 5}, cam128(), cam_identity());
  ASSERT_TRUE(px);
  EXPECT_EQ(*px, (PixelCoord{84, 64}));
}

TEST(ProjectPoint, BehindCameraIsCulled) {
  EXPECT_FALSE(project_point({0, 0, -1}, cam128(), cam_identity()));
  EXPECT_FALSE(project_point({0, 0, kNearPlane}, cam128(), cam_identity()));
  EXPECT_TRUE(project_point({0, 0, kNearPlane + 1e-3}, cam128(), cam_identity()));
}

TEST(ProjectPoint, OutOfBoundsIsAbsent) {
  EXPECT_FALSE(project_point({10, 0, 5}, cam128(), cam_identity()));
  EXPECT_FALSE(project_point({0, -10, 5}, cam128(), cam_identity()));
}

TEST(ProjectPoint, RoundsHalfAwayFromZero) {
  // Continuous u = 0.5 + cx offset chosen so u lands exactly on a half pixel.
  const CameraIntrinsics cam{100.0, 100.0, 10.0, 10.0, 20, 20};
  // xc/zc = 0.005 -> u = 10.5 -> 11
  auto px = project_point({0.025, 0, 5}, cam, cam_identity());
  ASSERT_TRUE(px);
  EXPECT_EQ(px->u, 11);
  // u = 9.5 -> 10 (away from zero, not to even)
  px = project_point({-0.025, 0, 5}, cam, cam_identity());
  ASSERT_TRUE(px);
  EXPECT_EQ(px->u, 10);
  // u = -0.5 rounds to -1 and is out of bounds
  const CameraIntrinsics edge{100.0, 100.0, 0.0, 0.0, 20, 20};
  EXPECT_FALSE(project_point({-0.025, 0, 5}, edge, cam_identity()));
}

TEST(ProjectPoint, UsesTheExtrinsics) {
  // Lidar frame x forward, y left, z up; camera z forward, x right, y down.
  Mat3 r;
  r << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  const RigidTransform t(r, Vec3::Zero(), "lidar", "camera");
  const auto px = project_point({5, -1, 0}, cam128(), t);  // 1 m to the right
  ASSERT_TRUE(px);
  EXPECT_EQ(*px, (PixelCoord{84, 64}));
}

TEST(ProjectPoint, ProjectiveInvarianceBeforeRounding) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> xy(-2, 2), z(0.5, 20), s(0.2, 5);
  for (int i = 0; i < 500; ++i) {
    const Point3 p{xy(rng), xy(rng), z(rng)};
    const double k = s(rng);
    const auto a = project_continuous(p, cam128(), cam_identity());
    const auto b = project_continuous({p.x * k, p.y * k, p.z * k}, cam128(), cam_identity());
    ASSERT_TRUE(a && b);
    EXPECT_NEAR(a->u, b->u, 1e-9);
    EXPECT_NEAR(a->v, b->v, 1e-9);
  }
}

TEST(ProjectPoint, InversePinholeRoundTrip) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> uv(0, 127), depth(0.5, 50);
  const auto cam = cam128();
  for (int i = 0; i < 500; ++i) {
    const double u0 = uv(rng), v0 = uv(rng), d = depth(rng);
    const Point3 p{(u0 - cam.cx) / cam.fx * d, (v0 - cam.cy) / cam.fy * d, d};
    const auto q = project_continuous(p, cam, cam_identity());
    ASSERT_TRUE(q);
    EXPECT_NEAR(q->u, u0, 1e-9);
    EXPECT_NEAR(q->v, v0, 1e-9);
  }
}

TEST(ProjectPoint, Deterministic) {
  std::mt19937_64 rng(23);
  const auto t = random_transform(rng, "lidar", "camera");
  std::uniform_real_distribution<double> c(-20, 20);
  for (int i = 0; i < 200; ++i) {
    const Point3 p{c(rng), c(rng), c(rng)};
    const auto a = project_continuous(p, cam128(), t);
    const auto b = project_continuous(p, cam128(), t);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_EQ(a->u, b->u);
      EXPECT_EQ(a->v, b->v);
    }
  }
}

TEST(ProjectCloud, KeepsInBoundsPointsInOrder) {
  LabeledPointCloud cloud;
  cloud.push_back({1, 0, 5}, PointLabel::Road);
  cloud.push_back({0, 0, -1}, PointLabel::Road);
  cloud.push_back({0, 0, 5}, PointLabel::NonRoad);
  const auto out = project_cloud(cloud, cam128(), cam_identity());
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], (ProjectedPoint{{84, 64}, PointLabel::Road}));
  EXPECT_EQ(out[1], (ProjectedPoint{{64, 64}, PointLabel::NonRoad}));
}

TEST(ProjectCloud, OpticalAxisPointsCollapse) {
  LabeledPointCloud cloud;
  for (int z = 2; z <= 10; ++z) cloud.push_back({0, 0, double(z)}, PointLabel::Road);
  const auto out = project_cloud(cloud, cam128(), cam_identity());
  ASSERT_EQ(out.size(), 9u);
  for (const auto& p : out) EXPECT_EQ(p.pixel, (PixelCoord{64, 64}));
}

TEST(ProjectCloud, EmptyCloudGivesEmptyOutput) {
  EXPECT_TRUE(project_cloud(LabeledPointCloud{}, cam128(), cam_identity()).empty());
}

TEST(ProjectCloud, RejectsMismatchedLabels) {
  LabeledPointCloud cloud;
  cloud.points.push_back({0, 0, 1});
  EXPECT_THROW(project_cloud(cloud, cam128(), cam_identity()), std::invalid_argument);
}

TEST(CameraIntrinsics, Validation) {
  EXPECT_NO_THROW(cam128().validate());
  EXPECT_THROW((CameraIntrinsics{0, 100, 64, 64, 128, 128}.validate()), std::invalid_argument);
  EXPECT_THROW((CameraIntrinsics{100, 100, 128, 64, 128, 128}.validate()), std::invalid_argument);
  EXPECT_THROW((CameraIntrinsics{100, 100, 64, -1, 128, 128}.validate()), std::invalid_argument);
}
