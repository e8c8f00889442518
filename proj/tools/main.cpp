#include <cstdlib>
#include <iostream>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "commands.hpp"
#include "json.hpp"

using namespace trajkit;
using namespace trajkit::cli;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("trajkit");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("TRAJKIT_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"trajkit: multi-subject 3D tracking and global trajectory toolkit"};
  app.require_subcommand(1);

  SimulateOptions sim;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Generate ground truth and detections from a scene script");
  simulate->add_option("scene", sim.scene, "Scene JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out_dir, "Output directory")->required();
  simulate->add_option("--config", sim.config, "Run config JSON")->check(CLI::ExistingFile);
  auto* seed_opt = simulate->add_option("--seed", sim_seed, "Noise seed (overrides the config)");
  simulate->add_flag("--via-maps", sim.via_maps, "Render and decode maps instead of exact detections");
  simulate->add_flag("--write-maps", sim.write_maps, "Also dump per-frame maps under <out>/maps");

  TrackOptions trk;
  std::string mode;
  auto* track = app.add_subcommand("track", "Track subjects through a detections file");
  track->add_option("detections", trk.detections, "detections.jsonl")->required()->check(CLI::ExistingFile);
  track->add_option("--subjects", trk.subjects, "Subjects JSON")->required()->check(CLI::ExistingFile);
  track->add_option("--mode", mode, "online or offline")->check(CLI::IsMember({"online", "offline"}));
  track->add_option("--config", trk.config, "Run config JSON")->check(CLI::ExistingFile);
  track->add_option("--out", trk.out, "tracks.jsonl")->required();
  track->add_option("--trajectories", trk.trajectories, "World trajectories JSONL");
  track->add_option("--csv", trk.csv, "World trajectories CSV");
  bool raw = false;
  track->add_flag("--no-smooth", raw, "Skip One-Euro smoothing of trajectories");

  EvalOptions ev;
  std::string metrics;
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--pred", ev.pred, "Predicted tracks or trajectories (repeatable)")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", ev.gt, "gt.jsonl (repeatable, one per --pred)")->required()->check(CLI::ExistingFile);
  eval->add_option("--metrics", metrics, "Comma list of mota,idf1,hota,ate");
  eval->add_option("--config", ev.config, "Run config JSON")->check(CLI::ExistingFile);
  eval->add_option("--out", ev.out, "Report JSON (default stdout)");
  eval->add_option("--csv", ev.csv, "Aligned trajectory CSV");

  ProjectOptions pr;
  auto* project = app.add_subcommand("project", "Write a panorama-to-perspective coordinate grid");
  project->add_option("--yaw", pr.yaw, "Degrees");
  project->add_option("--pitch", pr.pitch, "Degrees");
  project->add_option("--roll", pr.roll, "Degrees");
  project->add_option("--fov", pr.fov, "Horizontal field of view, degrees");
  project->add_option("--width", pr.out_w, "Output width");
  project->add_option("--height", pr.out_h, "Output height");
  project->add_option("--pano-width", pr.pano_w, "Panorama width");
  project->add_option("--pano-height", pr.pano_h, "Panorama height");
  project->add_option("--out", pr.out, "Output base path")->required();

  LossOptions lo;
  auto* losses = app.add_subcommand("eval-losses", "Evaluate weighted loss terms from a JSON file");
  losses->add_option("input", lo.input, "Loss input JSON")->required()->check(CLI::ExistingFile);
  losses->add_option("--config", lo.config, "Run config JSON")->check(CLI::ExistingFile);
  losses->add_option("--out", lo.out, "Report JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) {
      if (*seed_opt) sim.seed = sim_seed;
      cmd_simulate(sim, std::cout);
    } else if (*track) {
      if (!mode.empty()) trk.mode = mode == "online" ? TrackingMode::kOnline : TrackingMode::kOffline;
      trk.smooth = !raw;
      cmd_track(trk, std::cout);
    } else if (*eval) {
      std::stringstream ss(metrics);
      for (std::string m; std::getline(ss, m, ',');) {
        if (!m.empty()) ev.metrics.push_back(m);
      }
      cmd_eval(ev, std::cout);
    } else if (*project) {
      cmd_project(pr, std::cout);
    } else if (*losses) {
      cmd_eval_losses(lo, std::cout);
    }
  } catch (const Error& e) {
    spdlog::error("{} ({})", e.what(), to_string(e.kind()));
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("malformed input: {}", e.what());
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 0;
}
