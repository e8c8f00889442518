#pragma once

// Configuration and JSONL interchange for the command-line tool.
//
// detections.jsonl   {"frame": int, "detections": [{"t": [3], "c": num,
//                     "dm": [3], "tau": [3]?, "dT": [3]?}]}
// tracks.jsonl       {"frame": int, "tracks": [{"id": int, "t": [3],
//                     "interp": bool}]}
// gt.jsonl           {"frame": int, "camera": {"R": [[3]x3], "t": [3],
//                     "fov": num}, "agents": [{"id", "world": [3],
//                     "cam": [3], "visible": bool, "in_frustum": bool,
//                     "px": [2] | null,
//                     "tau": [3]}]}
// trajectories.jsonl {"frame": int, "trajectories": [{"id": int, "T": [3],
//                     "tau": [3], "valid": bool}]}
//
// Frames must increase strictly within a file. Non-finite numbers are
// rejected with the offending line number.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "trajkit/losses.hpp"
#include "trajkit/maps.hpp"
#include "trajkit/metrics.hpp"
#include "trajkit/simulator.hpp"
#include "trajkit/tracker.hpp"
#include "trajkit/trajectory.hpp"

namespace trajkit::cli {

using nlohmann::json;

struct RunConfig {
  TrackerConfig tracker;
  MapDims dims;
  DepthAnchor anchor;
  DecodeConfig decode;
  double render_sigma = 2.0;
  double match_distance = kDefaultMatchDistance;
  HotaConfig hota;
  LossWeights losses;
  OneEuroParams one_euro;
  std::uint64_t seed = 0;
};

// Missing keys keep their defaults; unknown keys are errors.
RunConfig run_config_from_json(const json& j);
json to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);  // empty path: defaults

// Whole-file JSON parse; syntax errors report line and column.
json parse_json_file(const std::filesystem::path& path);

struct SceneConfig {
  SceneScript scene;
  std::optional<NoiseModel> noise;
};

SceneConfig scene_config_from_json(const json& j);

std::vector<Subject> subjects_from_json(const json& j);
json subjects_to_json(std::span<const Subject> subjects);

// Reads one JSON object per non-empty line.
class JsonlReader {
 public:
  explicit JsonlReader(const std::filesystem::path& path);

  bool next(json& out);
  int line() const { return line_; }
  const std::string& name() const { return name_; }

 private:
  std::ifstream in_;
  std::string name_;
  int line_ = 0;
};

// Throws kParse if any number in `j` is not finite.
void require_finite(const json& j, const std::string& where);

std::string location(const JsonlReader& r);

struct DetectionRecord {
  FrameDetections frame;
  std::vector<std::optional<WorldSample>> world;  // parallel to detections
};

json detections_record(const FrameDetections& frame, const std::vector<WorldSample>* world);
DetectionRecord parse_detections_record(const json& j);

json tracks_record(const FrameTracks& frame);
FrameTracks parse_tracks_record(const json& j);

json gt_record(const GroundTruthFrame& frame);

struct GtRecord {
  int frame = 0;
  CameraPose pose;
  double fov = 0.0;
  struct Agent {
    int id = 0;
    Vec3 world = Vec3::Zero();
    Vec3 cam = Vec3::Zero();
    bool visible = false;
    bool in_frustum = false;
    Vec3 tau = Vec3::Zero();
  };
  std::vector<Agent> agents;
};

GtRecord parse_gt_record(const json& j);

struct TrajectoryRecordEntry {
  int id = 0;
  Vec3 T = Vec3::Zero();
  Vec3 tau = Vec3::Zero();
  bool valid = true;
};

json trajectories_record(int frame, std::span<const TrajectoryRecordEntry> entries);

// Frame-major rows from per-subject trajectories.
std::vector<std::pair<int, std::vector<TrajectoryRecordEntry>>> by_frame(std::span<const GlobalTrajectory> trajs);

// Writes a JSON value with a trailing newline; throws on I/O failure.
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace trajkit::cli
