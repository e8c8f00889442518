#pragma once

#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "trajkit/geometry.hpp"
#include "trajkit/maps.hpp"
#include "trajkit/tracker.hpp"

namespace trajkit {

struct TrajectoryPoint {
  int frame = 0;
  Vec3 position = Vec3::Zero();     // world, meters
  Vec3 orientation = Vec3::Zero();  // axis-angle, world frame
  bool valid = true;                // false when no world sample drove this step
};

struct GlobalTrajectory {
  int id = 0;
  std::vector<TrajectoryPoint> points;

  std::vector<Vec3> positions() const;
};

// T = { start, start + dT_2, start + dT_2 + dT_3, ... }; length offsets + 1.
std::vector<Vec3> accumulate_world(const Vec3& start, std::span<const Vec3> offsets);

// Forward differences of order 1 or 2; output length N - order.
std::vector<Vec3> finite_diff(std::span<const Vec3> seq, int order);

struct OneEuroParams {
  double min_cutoff = 1.0;   // Hz
  double beta = 0.007;
  double d_cutoff = 1.0;     // Hz
  double sample_rate = 30.0; // Hz
};

void validate(const OneEuroParams& p);

// Scalar One-Euro filter: first-order low-pass whose cutoff rises with the
// filtered speed.
class OneEuroFilter {
 public:
  explicit OneEuroFilter(const OneEuroParams& params);

  double filter(double x);
  void reset() { initialized_ = false; }

 private:
  double alpha(double cutoff) const;

  OneEuroParams params_;
  bool initialized_ = false;
  double x_hat_ = 0.0;
  double dx_hat_ = 0.0;
};

// Componentwise filtering, one independent filter per dimension.
std::vector<Eigen::VectorXd> one_euro_filter(std::span<const Eigen::VectorXd> signal, const OneEuroParams& params);
std::vector<Vec3> one_euro_filter(std::span<const Vec3> signal, const OneEuroParams& params);

// Picks, frame by frame, the axis-angle representative (angle + 2*pi*k along
// the same axis) closest to the previous frame's value.
std::vector<Vec3> unwrap_axis_angle(std::span<const Vec3> seq);

// Position and (unwrapped) orientation smoothing.
GlobalTrajectory smooth_trajectory(const GlobalTrajectory& traj, const OneEuroParams& params);

struct FrameWorldSamples {
  int frame = 0;
  std::map<int, WorldSample> by_id;
};

// Per subject: anchored at its first tracked position, then accumulates the
// world offsets of later frames. Frames without a sample contribute zero and
// are flagged invalid. `world` must list the same frames as `track`.
std::vector<GlobalTrajectory> assemble(const TrackOutput& track, std::span<const FrameWorldSamples> world);

// Builds world samples from the tracker's matched detection indices and the
// per-detection samples of each frame (parallel to the detections).
std::vector<FrameWorldSamples> world_samples_from_tracks(const TrackOutput& track,
                                                         std::span<const std::vector<WorldSample>> per_frame);

}  // namespace trajkit
