#pragma once

// Training objectives evaluated as plain functions of predictions and
// targets. Values only; nothing here computes gradients.

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trajkit/geometry.hpp"
#include "trajkit/maps.hpp"
#include "trajkit/trajectory.hpp"

namespace trajkit {

struct LossWeights {
  double motion_offset = 300.0;   // w_m
  double world_motion = 100.0;    // w_W, applied to each of the six parts
  double keypoints3d = 300.0;     // w_mpj
  double center_map = 100.0;      // w_cm, 3D and 2D center maps
  double keypoints3d_pa = 260.0;  // w_pmpj
  double keypoints2d = 300.0;     // w_pj2d
  double pose_prior = 1.6;        // w_prior
  double pose = 80.0;             // w_theta
  double shape = 60.0;            // w_beta
};

void validate(const LossWeights& w);

// One subject: gt camera-space positions t'_1..t'_N and predicted offsets
// dm_2..dm_N (one per consecutive pair).
struct MotionOffsetTrack {
  std::vector<Vec3> predicted_offsets;
  std::vector<Vec3> gt_positions;
};

// Mean squared component error of dm_i against t'_i - t'_{i-1}, pooled over
// subjects.
double motion_offset_loss(std::span<const MotionOffsetTrack> tracks);

// One subject's world motion, per frame. `joints` may be empty when foot
// terms are not wanted; otherwise every frame holds the full joint set.
struct WorldMotionSequence {
  std::vector<Vec3> positions;     // T
  std::vector<Vec3> orientations;  // tau, axis-angle
  std::vector<Points3> joints;     // world joints
};

WorldMotionSequence to_world_motion(const GlobalTrajectory& traj);

enum class WorldPart { kTrajectory, kVelocity, kAcceleration, kFootVelocity, kFootAcceleration, kOrientation };
inline constexpr int kWorldPartCount = 6;
const char* world_part_name(WorldPart part);

enum class OrientationMetric { kGeodesic, kAxisAngleL2 };

struct WorldMotionConfig {
  std::vector<int> foot_joints{7, 8, 10, 11};  // SMPL ankles and feet
  OrientationMetric orientation = OrientationMetric::kGeodesic;
};

struct WorldMotionLoss {
  std::array<double, kWorldPartCount> parts{};
  std::array<bool, kWorldPartCount> enabled{};
  double total = 0.0;  // mean of the enabled parts

  double part(WorldPart p) const { return parts[static_cast<std::size_t>(p)]; }
  bool has(WorldPart p) const { return enabled[static_cast<std::size_t>(p)]; }
};

// Parts are mean squared errors pooled over subjects. Velocity and
// acceleration parts need sequences of length >= 2 and >= 3; shorter inputs
// leave them disabled. The orientation part is the mean squared geodesic
// angle (radians) by default.
WorldMotionLoss world_motion_loss(std::span<const WorldMotionSequence> pred,
                                  std::span<const WorldMotionSequence> target,
                                  const WorldMotionConfig& cfg = {});

// Penalty-reduced focal loss on heatmaps (alpha = 2, beta = 4), normalized by
// the number of cells where gt == 1. It vanishes at pred == gt only when gt is
// binary; with Gaussian targets the negative cells around a peak still
// contribute.
double focal_center_loss(const CenterMap3D& pred, const CenterMap3D& gt);

enum class KeypointMode { kRaw, kProcrustes };

// Mean squared component error for one person.
double keypoint3d_loss(const Points3& pred, const Points3& gt, KeypointMode mode = KeypointMode::kRaw);

// Projects pred + t_hat and compares with the 2D joints in normalized image
// coordinates (x / width * 2 - 1). Joints with visible[i] == false are left
// out of the mean; an empty mask means all visible.
double projection2d_loss(const Points3& pred, const Vec3& t_hat, const Points2& gt_2d,
                         const CameraIntrinsics& K, const std::vector<bool>& visible = {});

double param_l2_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt);

// Term names accepted by total_loss and the weight each one takes.
//   motion_offset                                   w_m
//   world_trajectory, world_velocity,
//   world_acceleration, world_foot_velocity,
//   world_foot_acceleration, world_orientation      w_W
//   center_map_3d, center_map_2d                    w_cm
//   keypoints3d                                     w_mpj
//   keypoints3d_pa                                  w_pmpj
//   keypoints2d                                     w_pj2d
//   pose                                            w_theta
//   shape                                           w_beta
//   pose_prior                                      w_prior
double loss_weight(const std::string& term, const LossWeights& w);

struct TotalLoss {
  double total = 0.0;
  std::map<std::string, double> weighted;  // per term, weight * value
};

TotalLoss total_loss(const std::map<std::string, double>& parts, const LossWeights& w = {});

// Adds the enabled world motion parts under their term names.
void add_world_parts(std::map<std::string, double>& parts, const WorldMotionLoss& loss);

}  // namespace trajkit
