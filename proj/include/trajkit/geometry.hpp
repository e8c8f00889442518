#pragma once

// Camera model, rigid/similarity transforms and small solvers shared by every
// other module.
//
// Coordinate convention: right-handed, +x right, +y down, +z forward. The
// camera looks along +z. The world frame of a sequence is the camera frame of
// its first frame. Angles are degrees at API boundaries, radians inside.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace trajkit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// One point per row. The fixed column count keeps joint sets shaped Q x 3.
using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

struct CameraIntrinsics {
  double fov_deg = 50.0;
  int width = 512;
  int height = 512;
  double focal = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

// Pinhole model with a horizontal field of view; principal point at the image
// center.
CameraIntrinsics make_intrinsics(double fov_deg, int width, int height);

Vec2 project_point(const CameraIntrinsics& K, const Vec3& X);

// Inverse of project_point for a known depth.
Vec3 back_project(const CameraIntrinsics& K, const Vec2& pixel, double depth);

// World-to-camera rigid transform: X_cam = rotation * X_world + translation.
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static CameraPose identity() { return {}; }

  // Pose of a camera whose camera-to-world rotation is `orientation` and whose
  // optical center sits at `center` in world coordinates.
  static CameraPose from_center(const Mat3& orientation, const Vec3& center);

  Vec3 center() const { return -rotation.transpose() * translation; }
  CameraPose inverse() const;
};

Vec3 world_to_camera(const CameraPose& pose, const Vec3& Xw);
Vec3 camera_to_world(const CameraPose& pose, const Vec3& Xc);

bool is_rotation(const Mat3& R, double tol = 1e-9);

// Elementary rotations. yaw turns about +y and a positive yaw moves the
// forward axis (+z) toward +x; pitch turns about +x; roll about +z.
Mat3 yaw_matrix(double yaw_deg);
Mat3 pitch_matrix(double pitch_deg);
Mat3 roll_matrix(double roll_deg);
// yaw * pitch * roll
Mat3 rotation_from_ypr(double yaw_deg, double pitch_deg, double roll_deg);

Mat3 axis_angle_to_matrix(const Vec3& axis_angle);
Vec3 matrix_to_axis_angle(const Mat3& R);
// Angle in radians of R_a^T R_b.
double geodesic_angle(const Mat3& Ra, const Mat3& Rb);

// Continuous 6D rotation representation: v[0..2] is the first column and
// v[3..5] the second column before Gram-Schmidt.
Mat3 rot6d_to_matrix(const Vec6& v);
Vec6 matrix_to_rot6d(const Mat3& R);

struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  Points3 apply(const Points3& pts) const;
};

// Least-squares similarity taking `src` onto `dst` (rows correspond).
// Reflections are excluded: the returned rotation always has det +1.
SimilarityTransform umeyama_align(const Points3& src, const Points3& dst);

struct ProcrustesResult {
  Points3 aligned;
  SimilarityTransform transform;
};

// Aligns a single person's joints to the ground truth. Multi-person data must
// go through procrustes_align_batch so each person gets its own 3x3 fit.
ProcrustesResult procrustes_align(const Points3& pred, const Points3& gt);

std::vector<ProcrustesResult> procrustes_align_batch(std::span<const Points3> pred,
                                                     std::span<const Points3> gt);

struct RansacConfig {
  int iterations = 200;
  double inlier_px = 8.0;
  int min_inliers = 4;
  std::uint64_t seed = 0;
};

struct PnpResult {
  Vec3 translation = Vec3::Zero();
  std::vector<bool> inliers;
  double mean_inlier_error = 0.0;
};

// Translation-only PnP: body joints are known up to a camera-space
// translation (rotation and articulation already applied), and t is solved so
// that project(joint + t) matches the observed 2D joints.
PnpResult pnp_translation_ransac(const Points3& joints_cam_relative, const Points2& joints_2d,
                                 const CameraIntrinsics& K, const RansacConfig& cfg = {});

}  // namespace trajkit
