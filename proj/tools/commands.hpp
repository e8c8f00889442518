#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "trajkit/errors.hpp"
#include "trajkit/tracker.hpp"

namespace trajkit::cli {

// 0 success, 2 usage, 3 data, 4 numerical.
int exit_code(ErrorKind kind);

struct SimulateOptions {
  std::filesystem::path scene;
  std::filesystem::path out_dir;
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  bool via_maps = false;
  bool write_maps = false;
};

// Writes gt.jsonl, detections.jsonl and subjects.json (plus maps/ when asked)
// and prints a summary.
void cmd_simulate(const SimulateOptions& opt, std::ostream& log);

struct TrackOptions {
  std::filesystem::path detections;
  std::filesystem::path subjects;
  std::filesystem::path config;
  std::optional<TrackingMode> mode;
  std::filesystem::path out;
  std::filesystem::path trajectories;  // optional world trajectories (JSONL)
  std::filesystem::path csv;           // optional trajectory CSV
  bool smooth = true;
};

void cmd_track(const TrackOptions& opt, std::ostream& log);

struct EvalOptions {
  std::vector<std::filesystem::path> pred;
  std::vector<std::filesystem::path> gt;
  std::vector<std::string> metrics;  // empty: all
  std::filesystem::path config;
  std::filesystem::path out;  // empty: stdout
  std::filesystem::path csv;  // optional aligned trajectories
};

void cmd_eval(const EvalOptions& opt, std::ostream& out);

struct ProjectOptions {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  double fov = 50.0;
  int out_w = 512;
  int out_h = 512;
  int pano_w = 2048;
  int pano_h = 1024;
  std::filesystem::path out;  // base path, writes .bin and .json
};

void cmd_project(const ProjectOptions& opt, std::ostream& log);

struct LossOptions {
  std::filesystem::path input;
  std::filesystem::path config;
  std::filesystem::path out;  // empty: stdout
};

void cmd_eval_losses(const LossOptions& opt, std::ostream& out);

}  // namespace trajkit::cli
