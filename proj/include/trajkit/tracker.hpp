#pragma once

// Memory-unit tracker. A fixed set of subjects, chosen in the first frame,
// is followed through the sequence. Each frame runs
//   filter -> duplicate suppression -> offset-compensated Hungarian matching
//   -> memory update (failure timer, retirement)
// Detections that do not match a subject never create nodes.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "trajkit/geometry.hpp"
#include "trajkit/maps.hpp"

namespace trajkit {

enum class TrackingMode { kOnline, kOffline };
enum class DuplicateSpace { kWeighted, kRawMeters };

struct TrackerConfig {
  double conf_thresh = 0.05;       // lambda_c
  double scale_thresh = 0.13;      // lambda_s, on 1/z
  double duplicate_thresh = 0.05;  // lambda_d
  double match_thresh = 1.0;       // lambda_m
  int max_failure_frames = 100;    // lambda_f, frames
  Vec3 weights{1.2, 2.5, 25.0};    // W
  TrackingMode mode = TrackingMode::kOnline;
  DuplicateSpace duplicate_space = DuplicateSpace::kWeighted;
};

void validate(const TrackerConfig& cfg);

// (x, y, 1 / (1 + z))
Vec3 depth_transform(const Vec3& t);

// W applied to the depth-transformed coordinates; the space distances are
// measured in.
Vec3 weighted_embedding(const Vec3& t, const TrackerConfig& cfg);

struct HistoryEntry {
  int frame = 0;
  Vec3 position = Vec3::Zero();
  bool matched = false;
  bool interpolated = false;
  int detection_index = -1;
};

struct MemoryNode {
  int id = 0;
  Vec3 position = Vec3::Zero();
  double confidence = 0.0;
  int failure_time = 0;
  std::vector<HistoryEntry> history;
};

std::vector<Detection> filter_detections(std::span<const Detection> dets, const TrackerConfig& cfg);

// Greedy from the most confident detection; anything closer than
// duplicate_thresh to a kept detection is dropped.
std::vector<Detection> suppress_duplicates(std::span<const Detection> dets, const TrackerConfig& cfg);

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (node index, detection index)
  std::vector<int> unmatched_nodes;
  std::vector<int> unmatched_dets;
  Eigen::MatrixXd cost;
};

// cost(k, j) = || W*phi(node_k.position) - W*phi(det_j.position - det_j.motion_offset) ||
MatchResult match_step(std::span<const MemoryNode> nodes, std::span<const Detection> dets,
                       const TrackerConfig& cfg);

// Applies matches made against `dets`, advances failure timers and removes
// nodes whose failure time exceeds max_failure_frames. When `record_history`
// is set, each surviving node gets a history entry for `frame`. Returns the
// removed nodes.
std::vector<MemoryNode> update_memory(std::vector<MemoryNode>& nodes, std::span<const Detection> dets,
                                      const MatchResult& matches, const TrackerConfig& cfg, int frame,
                                      bool record_history = true,
                                      std::span<const int> detection_indices = {});

// Offline only: positions of unmatched runs bounded by matched frames are
// replaced by linear interpolation between the bounding matches.
void interpolate_gap(MemoryNode& node, TrackingMode mode);

struct Subject {
  int id = 0;
  Vec3 position = Vec3::Zero();
};

struct TrackEntry {
  int id = 0;
  Vec3 position = Vec3::Zero();
  bool interpolated = false;
  bool matched = false;
  int detection_index = -1;  // index into the frame's input detections
};

struct FrameTracks {
  int frame = 0;
  std::vector<TrackEntry> tracks;  // sorted by id
};

using TrackOutput = std::vector<FrameTracks>;

struct FrameDetections {
  int frame = 0;
  std::vector<Detection> detections;
};

// One tracking session. Not thread-safe; may be moved between threads.
class TrackerSession {
 public:
  TrackerSession(TrackerConfig cfg, std::vector<Subject> subjects);

  // The first call initializes the memory nodes from this frame's detections
  // and throws kInitialization if a subject has no detection within
  // match_thresh. Returns the online view of the frame: every live node at its
  // latest position.
  FrameTracks step(int frame, std::span<const Detection> dets);

  // Offline mode: full output with gaps interpolated. Online mode: the frames
  // already returned by step() are not retained, so this returns empty.
  TrackOutput finish();

  const std::vector<MemoryNode>& nodes() const { return nodes_; }
  bool initialized() const { return initialized_; }

 private:
  // Returns, per node, the index of its detection in `dets`.
  std::vector<int> initialize(int frame, std::span<const Detection> dets);

  TrackerConfig cfg_;
  std::vector<Subject> subjects_;
  std::vector<MemoryNode> nodes_;
  std::vector<MemoryNode> retired_;
  bool initialized_ = false;
  int last_frame_ = 0;
};

TrackOutput track_sequence(std::span<const FrameDetections> frames, std::span<const Subject> subjects,
                           const TrackerConfig& cfg);

}  // namespace trajkit
