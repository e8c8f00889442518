#pragma once

// Tracking and pose metrics.
//
// Ground truth and predictions are matched per frame on 3D center distance.
// HOTA uses a 3D localization similarity, sim = max(0, 1 - d / dist_max),
// in place of the usual 2D box IoU, so values are not comparable with
// IoU-based HOTA numbers.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "trajkit/geometry.hpp"

namespace trajkit {

struct EvalObject {
  int id = 0;
  Vec3 position = Vec3::Zero();
  std::optional<Points3> joints;
  std::optional<Points3> vertices;
};

struct EvalFrame {
  int frame = 0;
  std::vector<EvalObject> gt;
  std::vector<EvalObject> pred;
};

using EvalSequence = std::vector<EvalFrame>;

// Throws kInvalidArgument if an id repeats within a frame on either side.
void validate(const EvalSequence& seq);

inline constexpr double kDefaultMatchDistance = 0.5;  // meters

struct FrameAssignment {
  std::vector<std::pair<int, int>> pairs;  // (gt index, pred index)
  std::vector<int> unmatched_gt;
  std::vector<int> unmatched_pred;
};

std::vector<FrameAssignment> match_frames(const EvalSequence& seq, double dist_thresh = kDefaultMatchDistance);

// RMSE after similarity alignment of pred onto gt.
double ate(const Points3& pred, const Points3& gt);
double ate(std::span<const Vec3> pred, std::span<const Vec3> gt);

struct ClearMot {
  double mota = 0.0;
  int id_switches = 0;
  int misses = 0;
  int false_positives = 0;
  int matches = 0;
  int gt_count = 0;
};

ClearMot clear_mot(const EvalSequence& seq, std::span<const FrameAssignment> assignment);

// Sums counts over sequences, which weights each sequence by its detections.
ClearMot aggregate(std::span<const ClearMot> parts);

struct Idf1 {
  double idf1 = 0.0;
  int idtp = 0;
  int idfp = 0;
  int idfn = 0;
  std::map<int, int> gt_to_pred;  // optimal identity bijection
};

Idf1 idf1(const EvalSequence& seq, std::span<const FrameAssignment> assignment);

struct HotaConfig {
  double dist_max = 1.0;  // meters; similarity reaches zero here
};

inline constexpr int kHotaAlphaCount = 19;  // 0.05, 0.10, ..., 0.95

struct Hota {
  double hota = 0.0;
  double deta = 0.0;
  double assa = 0.0;
  std::array<double, kHotaAlphaCount> hota_alpha{};
  std::array<double, kHotaAlphaCount> deta_alpha{};
  std::array<double, kHotaAlphaCount> assa_alpha{};
};

double hota_alpha(int i);
Hota hota(const EvalSequence& seq, const HotaConfig& cfg = {});

enum class PoseAlignment { kNone, kProcrustes };

// Mean per-joint error in millimeters for one person (inputs in meters).
double mpjpe(const Points3& pred, const Points3& gt, PoseAlignment mode = PoseAlignment::kNone);

// Multi-person batch; each person is aligned on its own.
std::vector<double> mpjpe_batch(std::span<const Points3> pred, std::span<const Points3> gt, PoseAlignment mode);

// Mean per-vertex error in millimeters.
double pve(const Points3& pred, const Points3& gt);

// Sparse Q x V matrix of convex vertex weights.
class KeypointRegressor {
 public:
  explicit KeypointRegressor(Eigen::SparseMatrix<double, Eigen::RowMajor> weights);

  int joints() const { return static_cast<int>(weights_.rows()); }
  int vertices() const { return static_cast<int>(weights_.cols()); }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& weights() const { return weights_; }

 private:
  Eigen::SparseMatrix<double, Eigen::RowMajor> weights_;
};

Points3 regress_joints(const KeypointRegressor& R, const Points3& vertices);

// Per ground-truth id: ATE of its identity-matched prediction over frames
// where both exist. Ids with fewer than 3 shared frames, or whose predicted
// track never moves (no defined similarity alignment), are skipped.
std::map<int, double> per_subject_ate(const EvalSequence& seq, const std::map<int, int>& gt_to_pred);

}  // namespace trajkit
