#include "doctest.h"

#include <cmath>
#include <random>

#include "trajkit/errors.hpp"
#include "trajkit/losses.hpp"

using namespace trajkit;

TEST_CASE("motion offset loss against gt differences") {
  MotionOffsetTrack t;
  t.gt_positions = {Vec3(0, 0, 3), Vec3(0.1, 0, 3), Vec3(0.3, 0, 3)};
  t.predicted_offsets = {Vec3(0.1, 0, 0), Vec3(0.2, 0, 0)};
  CHECK(motion_offset_loss(std::vector<MotionOffsetTrack>{t}) == doctest::Approx(0.0));
  t.predicted_offsets[1] = Vec3(0.2, 0.3, 0);
  // One component off by 0.3 over 2 offsets x 3 components.
  CHECK(motion_offset_loss(std::vector<MotionOffsetTrack>{t}) == doctest::Approx(0.09 / 6));
  t.predicted_offsets.pop_back();
  CHECK_THROWS_AS(motion_offset_loss(std::vector<MotionOffsetTrack>{t}), Error);
  try {
    motion_offset_loss(std::vector<MotionOffsetTrack>{});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientData);
  }
}

TEST_CASE("world motion parts") {
  WorldMotionSequence target, pred;
  for (int i = 0; i < 5; ++i) {
    target.positions.emplace_back(0.1 * i, 0, 3);
    target.orientations.emplace_back(0, 0.1 * i, 0);
  }
  pred = target;
  const WorldMotionLoss zero = world_motion_loss(std::vector{pred}, std::vector{target});
  CHECK(zero.total == 0.0);
  CHECK(zero.has(WorldPart::kAcceleration));
  CHECK_FALSE(zero.has(WorldPart::kFootVelocity));

  // Constant shift: trajectory error only.
  for (Vec3& p : pred.positions) p += Vec3(0.2, 0, 0);
  WorldMotionLoss l = world_motion_loss(std::vector{pred}, std::vector{target});
  CHECK(l.part(WorldPart::kTrajectory) == doctest::Approx(0.04 / 3));
  CHECK(l.part(WorldPart::kVelocity) == doctest::Approx(0.0));
  CHECK(l.part(WorldPart::kAcceleration) == doctest::Approx(0.0));
  CHECK(l.total == doctest::Approx(0.04 / 3 / 4));

  // Orientation: geodesic angle squared.
  pred = target;
  pred.orientations[2] = Vec3(0, 0.1 * 2 + 0.5, 0);
  l = world_motion_loss(std::vector{pred}, std::vector{target});
  CHECK(l.part(WorldPart::kOrientation) == doctest::Approx(0.25 / 5));

  // Foot terms with joints present.
  pred = target;
  for (int i = 0; i < 5; ++i) {
    target.joints.push_back(Points3::Zero(12, 3));
    pred.joints.push_back(Points3::Zero(12, 3));
  }
  pred.joints[4](7, 0) = 1.0;  // one foot joint jumps in the last frame
  l = world_motion_loss(std::vector{pred}, std::vector{target});
  REQUIRE(l.has(WorldPart::kFootVelocity));
  // One velocity component of 1.0 among 4 steps x 4 joints x 3.
  CHECK(l.part(WorldPart::kFootVelocity) == doctest::Approx(1.0 / 48));
  CHECK(l.part(WorldPart::kFootAcceleration) == doctest::Approx(1.0 / 36));

  WorldMotionSequence two;
  two.positions = {Vec3::Zero(), Vec3::Ones()};
  two.orientations = {Vec3::Zero(), Vec3::Zero()};
  l = world_motion_loss(std::vector{two}, std::vector{two});
  CHECK(l.has(WorldPart::kVelocity));
  CHECK_FALSE(l.has(WorldPart::kAcceleration));
  CHECK(std::string(world_part_name(WorldPart::kFootAcceleration)) == "world_foot_acceleration");
}

TEST_CASE("focal loss hand values") {
  CenterMap3D gt(1, 1, 3), pred(1, 1, 3);
  gt.values = {1.0, 0.5, 0.0};
  pred.values = {0.8, 0.4, 0.1};
  const double pos = -std::pow(0.2, 2) * std::log(0.8);
  const double neg1 = -std::pow(0.5, 4) * std::pow(0.4, 2) * std::log(0.6);
  const double neg2 = -std::pow(0.1, 2) * std::log(0.9);
  CHECK(focal_center_loss(pred, gt) == doctest::Approx(pos + neg1 + neg2).epsilon(1e-12));

  // Binary target matched exactly: zero.
  CenterMap3D bin(1, 2, 2);
  bin.values = {1, 0, 0, 1};
  CHECK(focal_center_loss(bin, bin) == 0.0);
  // Gaussian target: still positive at pred == gt.
  CHECK(focal_center_loss(gt, gt) > 0.0);
  CHECK_THROWS_AS(focal_center_loss(CenterMap3D(1, 1, 2), gt), Error);
}

TEST_CASE("3D keypoint loss is translation sensitive unless aligned") {
  Points3 gt(4, 3);
  gt << 0, 0, 0,
        1, 0, 0,
        0, 1, 0,
        0, 0, 1;
  const Points3 moved = gt.rowwise() + Eigen::RowVector3d(0.1, 0, 0);
  CHECK(keypoint3d_loss(moved, gt) == doctest::Approx(0.01 / 3));
  CHECK(keypoint3d_loss(moved, gt, KeypointMode::kProcrustes) < 1e-20);
}

TEST_CASE("2D projection loss in normalized coordinates") {
  const CameraIntrinsics K = make_intrinsics(50.0, 512, 256);
  Points3 pred = Points3::Zero(2, 3);
  pred(1, 0) = 0.1;
  const Vec3 t(0, 0, 4);
  Points2 gt(2, 2);
  gt.row(0) = project_point(K, t).transpose();
  gt.row(1) = project_point(K, Vec3(0.1, 0, 4)).transpose();
  CHECK(projection2d_loss(pred, t, gt, K) == doctest::Approx(0.0));
  gt(1, 0) += 25.6;   // 0.1 in normalized x
  gt(1, 1) += 12.8;   // 0.1 in normalized y
  CHECK(projection2d_loss(pred, t, gt, K) == doctest::Approx(0.02 / 4));
  CHECK(projection2d_loss(pred, t, gt, K, {true, false}) == doctest::Approx(0.0));
  CHECK(projection2d_loss(pred, t, gt, K, {false, false}) == 0.0);
}

TEST_CASE("weighted total") {
  LossWeights w;
  const std::map<std::string, double> parts = {
      {"motion_offset", 0.01}, {"world_velocity", 0.002}, {"center_map_3d", 0.5}, {"pose_prior", 3.0}};
  const TotalLoss t = total_loss(parts, w);
  CHECK(t.total == doctest::Approx(300 * 0.01 + 100 * 0.002 + 100 * 0.5 + 1.6 * 3.0));
  CHECK(t.weighted.at("pose_prior") == doctest::Approx(4.8));
  CHECK_THROWS_AS(total_loss({{"bogus", 1.0}}, w), Error);
  CHECK_THROWS_AS(total_loss({{"pose", -1.0}}, w), Error);
  CHECK(loss_weight("shape", w) == 60.0);
  CHECK(loss_weight("keypoints3d_pa", w) == 260.0);
  LossWeights neg;
  neg.shape = -1;
  CHECK_THROWS_AS(validate(neg), Error);
}

TEST_CASE("world parts are added under their names") {
  WorldMotionSequence a;
  a.positions = {Vec3::Zero(), Vec3::Ones(), Vec3(2, 2, 2)};
  a.orientations = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::map<std::string, double> parts;
  add_world_parts(parts, world_motion_loss(std::vector{a}, std::vector{a}));
  CHECK(parts.size() == 4);
  CHECK(parts.count("world_orientation") == 1);
  CHECK(parts.count("world_foot_velocity") == 0);
}
