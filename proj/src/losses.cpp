#include "trajkit/losses.hpp"

#include <algorithm>
#include <cmath>

#include "trajkit/errors.hpp"

namespace trajkit {

void validate(const LossWeights& w) {
  for (double v : {w.motion_offset, w.world_motion, w.keypoints3d, w.center_map, w.keypoints3d_pa, w.keypoints2d,
                   w.pose_prior, w.pose, w.shape}) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::kInvalidArgument, "loss weights must be finite and >= 0");
  }
}

double motion_offset_loss(std::span<const MotionOffsetTrack> tracks) {
  double sum = 0.0;
  std::size_t terms = 0;
  for (const MotionOffsetTrack& t : tracks) {
    if (t.gt_positions.empty() || t.predicted_offsets.size() + 1 != t.gt_positions.size()) {
      fail(ErrorKind::kInvalidArgument, "motion_offset_loss: need one offset per consecutive gt pair");
    }
    for (std::size_t i = 0; i < t.predicted_offsets.size(); ++i) {
      sum += (t.predicted_offsets[i] - (t.gt_positions[i + 1] - t.gt_positions[i])).squaredNorm();
      ++terms;
    }
  }
  if (terms == 0) fail(ErrorKind::kInsufficientData, "motion_offset_loss: no frame pairs");
  return sum / (3.0 * static_cast<double>(terms));
}

WorldMotionSequence to_world_motion(const GlobalTrajectory& traj) {
  WorldMotionSequence s;
  for (const auto& p : traj.points) {
    s.positions.push_back(p.position);
    s.orientations.push_back(p.orientation);
  }
  return s;
}

const char* world_part_name(WorldPart part) {
  switch (part) {
    case WorldPart::kTrajectory: return "world_trajectory";
    case WorldPart::kVelocity: return "world_velocity";
    case WorldPart::kAcceleration: return "world_acceleration";
    case WorldPart::kFootVelocity: return "world_foot_velocity";
    case WorldPart::kFootAcceleration: return "world_foot_acceleration";
    case WorldPart::kOrientation: return "world_orientation";
  }
  return "?";
}

namespace {

struct Accum {
  double sum = 0.0;
  double count = 0.0;

  void add_vec(const Vec3& d) {
    sum += d.squaredNorm();
    count += 3.0;
  }
};

void add_diffs(Accum& acc, std::span<const Vec3> a, std::span<const Vec3> b, int order) {
  const auto da = finite_diff(a, order);
  const auto db = finite_diff(b, order);
  for (std::size_t i = 0; i < da.size(); ++i) acc.add_vec(da[i] - db[i]);
}

std::vector<Vec3> joint_track(const WorldMotionSequence& s, int joint) {
  std::vector<Vec3> out;
  out.reserve(s.joints.size());
  for (const Points3& J : s.joints) out.push_back(J.row(joint).transpose());
  return out;
}

}  // namespace

WorldMotionLoss world_motion_loss(std::span<const WorldMotionSequence> pred,
                                  std::span<const WorldMotionSequence> target, const WorldMotionConfig& cfg) {
  if (pred.size() != target.size() || pred.empty()) {
    fail(ErrorKind::kInvalidArgument, "world_motion_loss: subject counts differ or are zero");
  }
  std::array<Accum, kWorldPartCount> acc{};
  auto at = [&](WorldPart p) -> Accum& { return acc[static_cast<std::size_t>(p)]; };

  bool feet = true;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const WorldMotionSequence& p = pred[s];
    const WorldMotionSequence& t = target[s];
    const std::size_t n = t.positions.size();
    if (p.positions.size() != n || p.orientations.size() != n || t.orientations.size() != n) {
      fail(ErrorKind::kInvalidArgument, "world_motion_loss: sequence lengths differ");
    }
    if (n == 0) fail(ErrorKind::kInvalidArgument, "world_motion_loss: empty sequence");
    if (p.joints.size() != t.joints.size()) fail(ErrorKind::kInvalidArgument, "world_motion_loss: joint frames differ");
    if (t.joints.empty()) {
      feet = false;
    } else if (t.joints.size() != n) {
      fail(ErrorKind::kInvalidArgument, "world_motion_loss: joints must cover every frame");
    }

    for (std::size_t i = 0; i < n; ++i) at(WorldPart::kTrajectory).add_vec(p.positions[i] - t.positions[i]);
    if (n >= 2) add_diffs(at(WorldPart::kVelocity), p.positions, t.positions, 1);
    if (n >= 3) add_diffs(at(WorldPart::kAcceleration), p.positions, t.positions, 2);

    for (std::size_t i = 0; i < n; ++i) {
      if (cfg.orientation == OrientationMetric::kGeodesic) {
        const double a = geodesic_angle(axis_angle_to_matrix(p.orientations[i]), axis_angle_to_matrix(t.orientations[i]));
        at(WorldPart::kOrientation).sum += a * a;
        at(WorldPart::kOrientation).count += 1.0;
      } else {
        at(WorldPart::kOrientation).add_vec(p.orientations[i] - t.orientations[i]);
      }
    }

    if (!t.joints.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        if (p.joints[i].rows() != t.joints[i].rows()) fail(ErrorKind::kInvalidArgument, "world_motion_loss: joint counts differ");
      }
      for (int j : cfg.foot_joints) {
        if (j < 0 || j >= t.joints.front().rows()) fail(ErrorKind::kInvalidArgument, "world_motion_loss: foot joint out of range");
        const auto pj = joint_track(p, j);
        const auto tj = joint_track(t, j);
        if (n >= 2) add_diffs(at(WorldPart::kFootVelocity), pj, tj, 1);
        if (n >= 3) add_diffs(at(WorldPart::kFootAcceleration), pj, tj, 2);
      }
    }
  }
  if (cfg.foot_joints.empty()) feet = false;

  WorldMotionLoss r;
  int enabled = 0;
  for (int k = 0; k < kWorldPartCount; ++k) {
    const auto part = static_cast<WorldPart>(k);
    const bool foot_part = part == WorldPart::kFootVelocity || part == WorldPart::kFootAcceleration;
    const auto ki = static_cast<std::size_t>(k);
    r.enabled[ki] = acc[ki].count > 0.0 && (!foot_part || feet);
    if (!r.enabled[ki]) continue;
    r.parts[ki] = acc[ki].sum / acc[ki].count;
    r.total += r.parts[ki];
    ++enabled;
  }
  r.total /= enabled;
  return r;
}

double focal_center_loss(const CenterMap3D& pred, const CenterMap3D& gt) {
  if (pred.D != gt.D || pred.H != gt.H || pred.W != gt.W || pred.values.size() != gt.values.size()) {
    fail(ErrorKind::kInvalidArgument, "focal_center_loss: map dims differ");
  }
  constexpr double kEps = 1e-12;
  double pos_loss = 0.0, neg_loss = 0.0;
  int positives = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    const double g = gt.values[i];
    const double p = std::clamp(pred.values[i], kEps, 1.0 - kEps);
    if (g >= 1.0) {
      ++positives;
      if (pred.values[i] < 1.0) pos_loss -= std::pow(1.0 - p, 2) * std::log(p);
    } else if (pred.values[i] > 0.0) {
      neg_loss -= std::pow(1.0 - g, 4) * p * p * std::log(1.0 - p);
    }
  }
  return (pos_loss + neg_loss) / std::max(1, positives);
}

double keypoint3d_loss(const Points3& pred, const Points3& gt, KeypointMode mode) {
  if (pred.rows() != gt.rows() || pred.rows() == 0) fail(ErrorKind::kInvalidArgument, "keypoint3d_loss: joint sets differ in shape");
  const Points3 p = mode == KeypointMode::kProcrustes ? procrustes_align(pred, gt).aligned : pred;
  return (p - gt).squaredNorm() / static_cast<double>(p.size());
}

double projection2d_loss(const Points3& pred, const Vec3& t_hat, const Points2& gt_2d, const CameraIntrinsics& K,
                         const std::vector<bool>& visible) {
  if (pred.rows() != gt_2d.rows()) fail(ErrorKind::kInvalidArgument, "projection2d_loss: joint counts differ");
  if (!visible.empty() && visible.size() != static_cast<std::size_t>(pred.rows())) {
    fail(ErrorKind::kInvalidArgument, "projection2d_loss: mask length differs");
  }
  const Vec2 scale(2.0 / K.width, 2.0 / K.height);
  double sum = 0.0;
  int used = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    if (!visible.empty() && !visible[static_cast<std::size_t>(i)]) continue;
    const Vec2 px = project_point(K, pred.row(i).transpose() + t_hat);
    const Vec2 d = (px - gt_2d.row(i).transpose()).cwiseProduct(scale);
    sum += d.squaredNorm();
    ++used;
  }
  return used == 0 ? 0.0 : sum / (2.0 * used);
}

double param_l2_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt) {
  if (pred.size() != gt.size() || pred.size() == 0) fail(ErrorKind::kInvalidArgument, "param_l2_loss: lengths differ");
  return (pred - gt).squaredNorm() / static_cast<double>(pred.size());
}

double loss_weight(const std::string& term, const LossWeights& w) {
  static const std::map<std::string, double LossWeights::*> table = {
      {"motion_offset", &LossWeights::motion_offset},
      {"world_trajectory", &LossWeights::world_motion},
      {"world_velocity", &LossWeights::world_motion},
      {"world_acceleration", &LossWeights::world_motion},
      {"world_foot_velocity", &LossWeights::world_motion},
      {"world_foot_acceleration", &LossWeights::world_motion},
      {"world_orientation", &LossWeights::world_motion},
      {"center_map_3d", &LossWeights::center_map},
      {"center_map_2d", &LossWeights::center_map},
      {"keypoints3d", &LossWeights::keypoints3d},
      {"keypoints3d_pa", &LossWeights::keypoints3d_pa},
      {"keypoints2d", &LossWeights::keypoints2d},
      {"pose", &LossWeights::pose},
      {"shape", &LossWeights::shape},
      {"pose_prior", &LossWeights::pose_prior},
  };
  const auto it = table.find(term);
  if (it == table.end()) fail(ErrorKind::kInvalidArgument, "unknown loss term '" + term + "'");
  return w.*(it->second);
}

TotalLoss total_loss(const std::map<std::string, double>& parts, const LossWeights& w) {
  validate(w);
  TotalLoss r;
  for (const auto& [name, value] : parts) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      fail(ErrorKind::kInvalidArgument, "loss term '" + name + "' must be finite and >= 0");
    }
    const double v = loss_weight(name, w) * value;
    r.weighted[name] = v;
    r.total += v;
  }
  return r;
}

void add_world_parts(std::map<std::string, double>& parts, const WorldMotionLoss& loss) {
  for (int k = 0; k < kWorldPartCount; ++k) {
    const auto part = static_cast<WorldPart>(k);
    if (loss.has(part)) parts[world_part_name(part)] = loss.part(part);
  }
}

}  // namespace trajkit
