#include "trajkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "trajkit/errors.hpp"

namespace trajkit {

CameraIntrinsics make_intrinsics(double fov_deg, int width, int height) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
    fail(ErrorKind::kInvalidArgument, "fov_deg must lie in (0, 180)");
  }
  if (width < 1 || height < 1) {
    fail(ErrorKind::kInvalidArgument, "image dimensions must be positive");
  }
  CameraIntrinsics K;
  K.fov_deg = fov_deg;
  K.width = width;
  K.height = height;
  K.focal = (width / 2.0) / std::tan(deg_to_rad(fov_deg) / 2.0);
  K.cx = width / 2.0;
  K.cy = height / 2.0;
  return K;
}

Vec2 project_point(const CameraIntrinsics& K, const Vec3& X) {
  if (!(X.z() > 0.0)) fail(ErrorKind::kBehindCamera, "point is behind the camera");
  return {K.cx + K.focal * X.x() / X.z(), K.cy + K.focal * X.y() / X.z()};
}

Vec3 back_project(const CameraIntrinsics& K, const Vec2& pixel, double depth) {
  return {(pixel.x() - K.cx) * depth / K.focal, (pixel.y() - K.cy) * depth / K.focal, depth};
}

CameraPose CameraPose::from_center(const Mat3& orientation, const Vec3& center) {
  CameraPose pose;
  pose.rotation = orientation.transpose();
  pose.translation = -pose.rotation * center;
  return pose;
}

CameraPose CameraPose::inverse() const {
  CameraPose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -inv.rotation * translation;
  return inv;
}

Vec3 world_to_camera(const CameraPose& pose, const Vec3& Xw) {
  return pose.rotation * Xw + pose.translation;
}

Vec3 camera_to_world(const CameraPose& pose, const Vec3& Xc) {
  return pose.rotation.transpose() * (Xc - pose.translation);
}

bool is_rotation(const Mat3& R, double tol) {
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho < tol && std::abs(R.determinant() - 1.0) < tol;
}

Mat3 yaw_matrix(double yaw_deg) {
  const double a = deg_to_rad(yaw_deg);
  const double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << c, 0, s,
       0, 1, 0,
      -s, 0, c;
  return R;
}

Mat3 pitch_matrix(double pitch_deg) {
  const double a = deg_to_rad(pitch_deg);
  const double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return R;
}

Mat3 roll_matrix(double roll_deg) {
  const double a = deg_to_rad(roll_deg);
  const double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return R;
}

Mat3 rotation_from_ypr(double yaw_deg, double pitch_deg, double roll_deg) {
  return yaw_matrix(yaw_deg) * pitch_matrix(pitch_deg) * roll_matrix(roll_deg);
}

Mat3 axis_angle_to_matrix(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-15) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

Vec3 matrix_to_axis_angle(const Mat3& R) {
  const Eigen::AngleAxisd aa(Eigen::Quaterniond(R).normalized());
  return aa.axis() * aa.angle();
}

double geodesic_angle(const Mat3& Ra, const Mat3& Rb) {
  const Eigen::Quaterniond q(Ra.transpose() * Rb);
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

Mat3 rot6d_to_matrix(const Vec6& v) {
  const Vec3 a1 = v.head<3>();
  const Vec3 a2 = v.tail<3>();
  const double n1 = a1.norm();
  if (n1 < 1e-8) fail(ErrorKind::kDegenerate, "6D rotation: first column is near zero");
  const Vec3 b1 = a1 / n1;
  const Vec3 u2 = a2 - b1.dot(a2) * b1;
  const double n2 = u2.norm();
  if (n2 < 1e-8 * std::max(1.0, a2.norm())) {
    fail(ErrorKind::kDegenerate, "6D rotation: columns are parallel or second is zero");
  }
  const Vec3 b2 = u2 / n2;
  Mat3 R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b1.cross(b2);
  return R;
}

Vec6 matrix_to_rot6d(const Mat3& R) {
  Vec6 v;
  v << R.col(0), R.col(1);
  return v;
}

Points3 SimilarityTransform::apply(const Points3& pts) const {
  Points3 out = scale * (pts * rotation.transpose());
  out.rowwise() += translation.transpose();
  return out;
}

SimilarityTransform umeyama_align(const Points3& src, const Points3& dst) {
  if (src.rows() != dst.rows()) {
    fail(ErrorKind::kInvalidArgument, "umeyama_align: point counts differ");
  }
  const auto n = src.rows();
  if (n < 3) fail(ErrorKind::kInsufficientData, "umeyama_align: need at least 3 points");

  const Vec3 mu_src = src.colwise().mean();
  const Vec3 mu_dst = dst.colwise().mean();
  const Points3 xs = src.rowwise() - mu_src.transpose();
  const Points3 xd = dst.rowwise() - mu_dst.transpose();
  const double var_src = xs.squaredNorm() / static_cast<double>(n);
  if (!(var_src > 1e-20 * std::max(1.0, mu_src.squaredNorm()))) {
    fail(ErrorKind::kInsufficientData, "umeyama_align: source points are coincident");
  }

  const Mat3 sigma = xd.transpose() * xs / static_cast<double>(n);
  Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 signs = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) signs(2) = -1.0;

  SimilarityTransform T;
  T.rotation = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
  T.scale = svd.singularValues().dot(signs) / var_src;
  T.translation = mu_dst - T.scale * T.rotation * mu_src;
  return T;
}

ProcrustesResult procrustes_align(const Points3& pred, const Points3& gt) {
  if (pred.rows() != gt.rows()) {
    fail(ErrorKind::kInvalidArgument, "procrustes_align: joint counts differ");
  }
  if (pred.rows() < 3) fail(ErrorKind::kInsufficientData, "procrustes_align: need >= 3 joints");
  ProcrustesResult r;
  r.transform = umeyama_align(pred, gt);
  // Mat3 is fixed-size; this guards against anyone swapping in a dynamic type.
  static_assert(decltype(r.transform.rotation)::RowsAtCompileTime == 3 &&
                decltype(r.transform.rotation)::ColsAtCompileTime == 3);
  r.aligned = r.transform.apply(pred);
  return r;
}

std::vector<ProcrustesResult> procrustes_align_batch(std::span<const Points3> pred,
                                                     std::span<const Points3> gt) {
  if (pred.size() != gt.size()) {
    fail(ErrorKind::kInvalidArgument, "procrustes_align_batch: person counts differ");
  }
  std::vector<ProcrustesResult> out;
  out.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) out.push_back(procrustes_align(pred[i], gt[i]));
  return out;
}

namespace {

// Two linear equations per joint in the unknown translation:
//   f*tx - (u-cx)*tz = (u-cx)*Z - f*X
//   f*ty - (v-cy)*tz = (v-cy)*Z - f*Y
bool solve_linear_translation(const Points3& joints, const Points2& px, const CameraIntrinsics& K,
                              std::span<const int> idx, Vec3& t) {
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd A(2 * m, 3);
  Eigen::VectorXd b(2 * m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const int q = idx[static_cast<std::size_t>(k)];
    const double du = px(q, 0) - K.cx;
    const double dv = px(q, 1) - K.cy;
    A.row(2 * k) << K.focal, 0.0, -du;
    A.row(2 * k + 1) << 0.0, K.focal, -dv;
    b(2 * k) = du * joints(q, 2) - K.focal * joints(q, 0);
    b(2 * k + 1) = dv * joints(q, 2) - K.focal * joints(q, 1);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < 3) return false;
  t = qr.solve(b);
  return t.allFinite();
}

double reprojection_error(const Points3& joints, const Points2& px, const CameraIntrinsics& K,
                          int q, const Vec3& t) {
  const Vec3 X = joints.row(q).transpose() + t;
  if (!(X.z() > 1e-9)) return std::numeric_limits<double>::infinity();
  const Vec2 p(K.cx + K.focal * X.x() / X.z(), K.cy + K.focal * X.y() / X.z());
  return (p - px.row(q).transpose()).norm();
}

// Gauss-Newton on the geometric reprojection error.
Vec3 refine_translation(const Points3& joints, const Points2& px, const CameraIntrinsics& K,
                        std::span<const int> idx, Vec3 t) {
  for (int iter = 0; iter < 20; ++iter) {
    Mat3 JtJ = Mat3::Zero();
    Vec3 Jtr = Vec3::Zero();
    for (int q : idx) {
      const Vec3 X = joints.row(q).transpose() + t;
      if (!(X.z() > 1e-9)) return t;
      const double iz = 1.0 / X.z();
      const Vec2 r(K.cx + K.focal * X.x() * iz - px(q, 0), K.cy + K.focal * X.y() * iz - px(q, 1));
      Eigen::Matrix<double, 2, 3> J;
      J << K.focal * iz, 0.0, -K.focal * X.x() * iz * iz,
           0.0, K.focal * iz, -K.focal * X.y() * iz * iz;
      JtJ += J.transpose() * J;
      Jtr += J.transpose() * r;
    }
    const Vec3 step = JtJ.ldlt().solve(-Jtr);
    if (!step.allFinite()) break;
    t += step;
    if (step.norm() < 1e-15 * std::max(1.0, t.norm())) break;
  }
  return t;
}

}  // namespace

PnpResult pnp_translation_ransac(const Points3& joints_cam_relative, const Points2& joints_2d,
                                 const CameraIntrinsics& K, const RansacConfig& cfg) {
  const auto Q = static_cast<int>(joints_cam_relative.rows());
  if (joints_2d.rows() != Q) fail(ErrorKind::kInvalidArgument, "pnp: joint counts differ");
  if (Q < 4) fail(ErrorKind::kInsufficientData, "pnp: need at least 4 joints");
  if (!joints_2d.allFinite() || !joints_cam_relative.allFinite()) {
    fail(ErrorKind::kInvalidArgument, "pnp: non-finite input");
  }

  auto collect_inliers = [&](const Vec3& t, std::vector<int>& idx, double& err_sum) {
    idx.clear();
    err_sum = 0.0;
    for (int q = 0; q < Q; ++q) {
      const double e = reprojection_error(joints_cam_relative, joints_2d, K, q, t);
      if (e <= cfg.inlier_px) {
        idx.push_back(q);
        err_sum += e;
      }
    }
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0, Q - 1);
  std::vector<int> best_idx, idx;
  double best_err = std::numeric_limits<double>::infinity();
  Vec3 best_t = Vec3::Zero();
  bool have_best = false;

  for (int it = 0; it < cfg.iterations; ++it) {
    const int a = pick(rng);
    int b = pick(rng);
    while (b == a) b = pick(rng);
    const int sample[2] = {a, b};
    Vec3 t;
    if (!solve_linear_translation(joints_cam_relative, joints_2d, K, sample, t)) continue;
    double err = 0.0;
    collect_inliers(t, idx, err);
    if (!have_best || idx.size() > best_idx.size() ||
        (idx.size() == best_idx.size() && err < best_err)) {
      best_idx = idx;
      best_err = err;
      best_t = t;
      have_best = true;
    }
  }

  if (!have_best || static_cast<int>(best_idx.size()) < std::max(cfg.min_inliers, 2)) {
    fail(ErrorKind::kNoSolution, "pnp: not enough inliers");
  }

  // Refit on the consensus set until it stops changing.
  Vec3 t = best_t;
  for (int round = 0; round < 5; ++round) {
    Vec3 lin;
    if (solve_linear_translation(joints_cam_relative, joints_2d, K, best_idx, lin)) t = lin;
    t = refine_translation(joints_cam_relative, joints_2d, K, best_idx, t);
    double err = 0.0;
    collect_inliers(t, idx, err);
    if (idx == best_idx) break;
    if (static_cast<int>(idx.size()) < cfg.min_inliers) break;
    best_idx = idx;
  }

  collect_inliers(t, idx, best_err);
  if (static_cast<int>(idx.size()) < cfg.min_inliers) {
    fail(ErrorKind::kNoSolution, "pnp: not enough inliers after refinement");
  }

  PnpResult result;
  result.translation = t;
  result.inliers.assign(static_cast<std::size_t>(Q), false);
  for (int q : idx) result.inliers[static_cast<std::size_t>(q)] = true;
  result.mean_inlier_error = best_err / static_cast<double>(idx.size());
  return result;
}

}  // namespace trajkit
