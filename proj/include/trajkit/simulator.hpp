#pragma once

// Deterministic scene generator used as ground truth by the tests and the
// CLI: scripted agents, a keyframed camera, rendered maps, corrupted
// detection streams, and the panorama / sliding-window camera geometry.
//
// Scripts are written in a free "scene" frame. The generated stream is
// re-expressed so that the camera frame of frame 0 is the world frame.
// Frames are numbered from 0; frame f happens at time f / frame_rate.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "trajkit/geometry.hpp"
#include "trajkit/maps.hpp"
#include "trajkit/tracker.hpp"
#include "trajkit/trajectory.hpp"

namespace trajkit {

enum class Interpolation { kLinear, kCubic };

struct Waypoint {
  double time = 0.0;  // seconds
  Vec3 position = Vec3::Zero();
};

struct AgentScript {
  int id = 0;
  std::vector<Waypoint> path;
  Interpolation interpolation = Interpolation::kLinear;
};

// Camera-to-scene orientation as yaw/pitch/roll in degrees, optical center in
// scene coordinates.
struct CameraKeyframe {
  double time = 0.0;
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  Vec3 position = Vec3::Zero();
  double fov_deg = 50.0;
};

struct OcclusionInterval {
  int agent_id = 0;
  int first = 0;  // inclusive
  int last = 0;   // inclusive
};

struct SceneScript {
  std::vector<AgentScript> agents;
  std::vector<CameraKeyframe> camera;  // empty: fixed camera at the origin
  int duration = 0;                    // frames
  double frame_rate = 30.0;
  int width = 512;
  int height = 512;
  std::vector<OcclusionInterval> occlusions;
};

void validate(const SceneScript& scene);

// Position at time t; clamped to the first/last waypoint outside the path.
Vec3 agent_position(const AgentScript& agent, double t);

struct AgentState {
  int id = 0;
  Vec3 world = Vec3::Zero();
  Vec3 camera = Vec3::Zero();
  Vec3 orientation = Vec3::Zero();  // heading about the world y axis, axis-angle
  bool in_frustum = false;
  bool occluded = false;
  bool visible = false;  // in_frustum && !occluded
  std::optional<Vec2> pixel;
};

struct GroundTruthFrame {
  int frame = 0;
  CameraPose pose;  // world -> camera
  CameraIntrinsics K;
  std::vector<AgentState> agents;  // script order

  const AgentState* find(int id) const;
};

struct GroundTruthStream {
  double frame_rate = 30.0;
  std::vector<GroundTruthFrame> frames;
};

GroundTruthStream simulate_sequence(const SceneScript& scene);

// Agents visible in the first frame, as tracker subjects.
std::vector<Subject> subjects_from_stream(const GroundTruthStream& stream);

// Detections with their world samples and the agent each one came from
// (-1 for false positives), all parallel per frame.
struct DetectionStream {
  std::vector<FrameDetections> frames;
  std::vector<std::vector<WorldSample>> world;
  std::vector<std::vector<int>> source;
};

// Exact detections of every visible agent. The motion offset is the
// camera-space displacement since the previous frame (zero at frame 0).
DetectionStream detections_from_stream(const GroundTruthStream& stream);

// World sample of one agent at frame index f: heading and world displacement
// since frame f - 1.
WorldSample world_sample_at(const GroundTruthStream& stream, std::size_t f, int agent_id);

// Ground-truth maps for frame index f of the stream: Gaussian centers, exact
// localization residuals and motion offsets on every cell a center owns, and
// (orientation, world offset) at each agent's feature cell.
FrameMaps render_ground_truth_maps(const GroundTruthStream& stream, std::size_t f, const MapDims& dims,
                                   const DepthAnchor& anchor, double sigma = 2.0);

// Full map pipeline over a stream: render, then decode each frame.
DetectionStream detections_via_maps(const GroundTruthStream& stream, const MapDims& dims,
                                    const DepthAnchor& anchor, const DecodeConfig& cfg = {},
                                    double sigma = 2.0);

struct NoiseModel {
  double position_sigma = 0.0;   // meters, per axis
  double confidence_jitter = 0.0;
  double dropout = 0.0;          // per detection
  double false_positive_rate = 0.0;  // Poisson mean per frame
  double fp_min_depth = 1.0;
  double fp_max_depth = 10.0;
  std::uint64_t seed = 0;
};

void validate(const NoiseModel& noise);

// False positives are placed uniformly over the image and the depth range
// [fp_min_depth, fp_max_depth] using each frame's intrinsics.
DetectionStream corrupt_detections(const DetectionStream& clean, const NoiseModel& noise,
                                   std::span<const CameraIntrinsics> per_frame_K);
DetectionStream corrupt_detections(const DetectionStream& clean, const NoiseModel& noise,
                                   const GroundTruthStream& stream);

// Per output pixel (row i, column j) the unit ray through its center
// (j + 0.5, i + 0.5), in panorama coordinates, and the equirectangular
// position it lands on. Longitude grows to the right (toward +x), latitude
// grows upward (toward -y). With odd sizes the middle pixel looks straight
// down the optical axis.
struct ProjectionGrid {
  int width = 0;
  int height = 0;
  int pano_width = 0;
  int pano_height = 0;
  std::vector<Vec3> directions;  // row-major
  std::vector<Vec2> lon_lat;     // radians, lon in [-pi, pi), lat in [-pi/2, pi/2]
  std::vector<Vec2> pano_xy;     // (column, row) in panorama pixels

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * width + static_cast<std::size_t>(j); }
};

// `rotation` takes camera rays into the panorama frame.
ProjectionGrid equirect_projection_grid(const Mat3& rotation, double fov_deg, int out_w, int out_h, int pano_w,
                                        int pano_h);

// Samples a single-channel panorama (rows x cols) along the grid. Pixel k
// covers [k, k + 1); longitude wraps, latitude clamps.
Eigen::MatrixXd remap_bilinear(const Eigen::MatrixXd& pano, const ProjectionGrid& grid);

struct CropWindow {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  Vec2 principal_shift = Vec2::Zero();  // relative to the first window
};

// Crops that slide over a static video. Moving the window by +dx shifts the
// principal point by -dx in crop pixels.
std::vector<CropWindow> sliding_window_camera(int full_w, int full_h, int window_w, int window_h,
                                              std::span<const Eigen::Vector2i> top_left);

struct PoseObservation {
  Points3 joints_relative;  // camera-space joints minus the root translation
  Points2 joints_2d;
  CameraPose pose;          // annotated world -> camera
};

struct SolvedPoint {
  Vec3 world = Vec3::Zero();
  Vec3 camera = Vec3::Zero();
  bool valid = false;
  double reprojection_error = 0.0;
};

// Per frame: translation PnP, then camera -> world under the annotated pose.
// Frames whose PnP fails come back with valid = false.
std::vector<SolvedPoint> solve_gt_world_trajectory(std::span<const PoseObservation> frames,
                                                   const CameraIntrinsics& K, const RansacConfig& ransac = {});

}  // namespace trajkit
