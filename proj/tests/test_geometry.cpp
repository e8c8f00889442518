#include "doctest.h"

#include <random>

#include "trajkit/errors.hpp"
#include "trajkit/geometry.hpp"

using namespace trajkit;

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

Points3 random_points(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Points3 p(n, 3);
  for (int i = 0; i < n; ++i) p.row(i) << u(rng), u(rng), u(rng);
  return p;
}

}  // namespace

TEST_CASE("intrinsics from horizontal fov") {
  const CameraIntrinsics K = make_intrinsics(50.0, 512, 512);
  // 256 / tan(25 deg)
  CHECK(K.focal == doctest::Approx(548.993771650447).epsilon(1e-12));
  CHECK(K.cx == 256.0);
  CHECK(K.cy == 256.0);
  CHECK_THROWS_AS(make_intrinsics(180.0, 512, 512), Error);
  CHECK_THROWS_AS(make_intrinsics(0.0, 512, 512), Error);
}

TEST_CASE("projection and back projection") {
  const CameraIntrinsics K = make_intrinsics(50.0, 512, 512);
  const Vec2 c = project_point(K, Vec3(0, 0, 5));
  CHECK(c.x() == 256.0);
  CHECK(c.y() == 256.0);
  const Vec2 p = project_point(K, Vec3(0.1, 0, 1));
  CHECK(p.x() == doctest::Approx(256.0 + 54.8993771));
  CHECK(p.y() == 256.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 200; ++i) {
    const Vec3 X(u(rng), u(rng), 0.5 + std::abs(u(rng)) * 5);
    const Vec3 back = back_project(K, project_point(K, X), X.z());
    CHECK((back - X).norm() < 1e-12);
  }
  try {
    project_point(K, Vec3(0, 0, -1));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBehindCamera);
  }
}

TEST_CASE("pose round trip and center") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const Mat3 R = random_rotation(rng);
    const Vec3 c = random_points(rng, 1).row(0).transpose();
    const CameraPose pose = CameraPose::from_center(R, c);
    CHECK((pose.center() - c).norm() < 1e-12);
    CHECK(world_to_camera(pose, c).norm() < 1e-12);
    const Vec3 X = random_points(rng, 1).row(0).transpose();
    CHECK((camera_to_world(pose, world_to_camera(pose, X)) - X).norm() < 1e-12);
    const CameraPose inv = pose.inverse();
    CHECK((world_to_camera(inv, world_to_camera(pose, X)) - X).norm() < 1e-12);
  }
}

TEST_CASE("elementary rotations follow the axis convention") {
  // Positive yaw swings the forward axis toward +x.
  const Vec3 f = yaw_matrix(90.0) * Vec3(0, 0, 1);
  CHECK((f - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((yaw_matrix(90.0) * Vec3(1, 0, 0) - Vec3(0, 0, -1)).norm() < 1e-15);
  CHECK(is_rotation(rotation_from_ypr(30, -20, 10)));
  const Mat3 R = rotation_from_ypr(30, -20, 10);
  CHECK((R - yaw_matrix(30) * pitch_matrix(-20) * roll_matrix(10)).norm() < 1e-15);
}

TEST_CASE("axis-angle conversions") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Mat3 R = random_rotation(rng);
    const Vec3 a = matrix_to_axis_angle(R);
    CHECK(a.norm() <= kPi + 1e-12);
    CHECK((axis_angle_to_matrix(a) - R).norm() < 1e-9);
  }
  CHECK(matrix_to_axis_angle(Mat3::Identity()).norm() == 0.0);
  CHECK(geodesic_angle(Mat3::Identity(), yaw_matrix(40)) == doctest::Approx(deg_to_rad(40)));
  CHECK(geodesic_angle(yaw_matrix(170), yaw_matrix(-170)) == doctest::Approx(deg_to_rad(20)));
}

TEST_CASE("6D rotation representation") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const Mat3 R = random_rotation(rng);
    CHECK((rot6d_to_matrix(matrix_to_rot6d(R)) - R).norm() < 1e-12);
  }
  // Non-orthogonal input is orthonormalized.
  Vec6 v;
  v << 2, 0, 0, 1, 3, 0;
  const Mat3 R = rot6d_to_matrix(v);
  CHECK(is_rotation(R));
  CHECK((R.col(0) - Vec3(1, 0, 0)).norm() < 1e-12);
  CHECK((R.col(1) - Vec3(0, 1, 0)).norm() < 1e-12);
  Vec6 bad;
  bad << 1, 0, 0, 2, 0, 0;
  CHECK_THROWS_AS(rot6d_to_matrix(bad), Error);
}

TEST_CASE("umeyama recovers similarity transforms") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.2, 5.0);
  for (int i = 0; i < 100; ++i) {
    const Points3 src = random_points(rng, 3 + i % 20);
    SimilarityTransform T;
    T.scale = u(rng);
    T.rotation = random_rotation(rng);
    T.translation = random_points(rng, 1).row(0).transpose() * 10;
    const SimilarityTransform est = umeyama_align(src, T.apply(src));
    CHECK(std::abs(est.scale - T.scale) < 1e-9);
    CHECK((est.rotation - T.rotation).norm() < 1e-9);
    CHECK((est.translation - T.translation).norm() < 1e-8);
    CHECK(est.rotation.determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("umeyama excludes reflections") {
  std::mt19937_64 rng(19);
  const Points3 src = random_points(rng, 20);
  Points3 mirrored = src;
  mirrored.col(0) *= -1.0;
  const SimilarityTransform T = umeyama_align(src, mirrored);
  CHECK(T.rotation.determinant() == doctest::Approx(1.0));
}

TEST_CASE("umeyama input errors") {
  Points3 two(2, 3);
  two.setRandom();
  CHECK_THROWS_AS(umeyama_align(two, two), Error);
  Points3 same = Points3::Ones(5, 3);
  try {
    umeyama_align(same, same);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientData);
  }
  Points3 a(4, 3), b(5, 3);
  a.setRandom();
  b.setRandom();
  CHECK_THROWS_AS(umeyama_align(a, b), Error);
  // Collinear points are fine for translation and scale.
  Points3 line(5, 3);
  for (int i = 0; i < 5; ++i) line.row(i) << i, 0, 0;
  const Points3 moved = (line * 2.0).rowwise() + Eigen::RowVector3d(1, 2, 3);
  const SimilarityTransform T = umeyama_align(line, moved);
  CHECK((T.apply(line) - moved).norm() < 1e-9);
}

TEST_CASE("procrustes per person, 3x3 rotation") {
  std::mt19937_64 rng(23);
  std::vector<Points3> gt, pred;
  for (int p = 0; p < 2; ++p) {
    gt.push_back(random_points(rng, 14));
    pred.push_back((gt.back() * random_rotation(rng).transpose()).rowwise() + Eigen::RowVector3d(p, 1, 2));
  }
  const auto res = procrustes_align_batch(pred, gt);
  REQUIRE(res.size() == 2);
  for (int p = 0; p < 2; ++p) {
    CHECK(res[static_cast<std::size_t>(p)].transform.rotation.rows() == 3);
    CHECK(is_rotation(res[static_cast<std::size_t>(p)].transform.rotation));
    CHECK((res[static_cast<std::size_t>(p)].aligned - gt[static_cast<std::size_t>(p)]).norm() < 1e-9);
  }
  CHECK_THROWS_AS(procrustes_align_batch(pred, std::span<const Points3>(gt).first(1)), Error);
}

TEST_CASE("translation PnP, noiseless and with outliers") {
  const CameraIntrinsics K = make_intrinsics(50.0, 512, 512);
  std::mt19937_64 rng(29);
  const Points3 joints = random_points(rng, 17) * 0.5;
  const Vec3 t(0.3, -0.2, 5.0);
  Points2 px(17, 2);
  for (int i = 0; i < 17; ++i) px.row(i) = project_point(K, joints.row(i).transpose() + t).transpose();

  const PnpResult r = pnp_translation_ransac(joints, px, K);
  CHECK((r.translation - t).norm() < 1e-9);
  CHECK(std::count(r.inliers.begin(), r.inliers.end(), true) == 17);

  Points2 noisy = px;
  noisy.row(3) += Eigen::RowVector2d(80, -60);
  noisy.row(9) += Eigen::RowVector2d(-120, 40);
  const PnpResult o = pnp_translation_ransac(joints, noisy, K);
  CHECK((o.translation - t).norm() < 1e-9);
  CHECK_FALSE(o.inliers[3]);
  CHECK_FALSE(o.inliers[9]);

  // Same seed, same answer.
  const PnpResult again = pnp_translation_ransac(joints, noisy, K);
  CHECK(again.translation == o.translation);

  Points2 garbage(17, 2);
  std::uniform_real_distribution<double> u(0, 512);
  for (int i = 0; i < 17; ++i) garbage.row(i) << u(rng), u(rng);
  try {
    pnp_translation_ransac(joints, garbage, K);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNoSolution);
  }
  CHECK_THROWS_AS(pnp_translation_ransac(joints.topRows(3), px.topRows(3), K), Error);
}
