#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_io.hpp"
#include "commands.hpp"
#include "trajkit/errors.hpp"
#include "trajkit/map_io.hpp"

using namespace trajkit;
using namespace trajkit::cli;
namespace fs = std::filesystem;

namespace {

fs::path workdir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "trajkit_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string bin() {
  const char* b = std::getenv("TRAJKIT_BIN");
  REQUIRE_MESSAGE(b != nullptr, "TRAJKIT_BIN not set");
  return b;
}

// Runs the tool; stderr goes to <dir>/stderr.txt.
int run(const fs::path& dir, const std::string& args) {
  const std::string cmd = bin() + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                          (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

const char* kOneAgent = R"({
  "duration": 40,
  "agents": [{"id": 3, "path": [{"t": 0, "p": [-0.3, 0.2, 4.0]}, {"t": 1.3, "p": [0.3, 0.2, 4.5]}]}]
})";

const char* kOcclusion = R"({
  "duration": 90,
  "agents": [
    {"id": 1, "path": [{"t": 0, "p": [-0.6, 0.2, 4.0]}, {"t": 3, "p": [-0.5, 0.2, 4.0]}]},
    {"id": 2, "path": [{"t": 0, "p": [0.6, 0.2, 5.0]}, {"t": 3, "p": [0.4, 0.2, 5.2]}]}
  ],
  "camera": [{"t": 0, "yaw": 0, "pitch": 0, "roll": 0, "position": [0, 0, 0]},
             {"t": 3, "yaw": 3, "pitch": 0, "roll": 0, "position": [0.05, 0, 0]}],
  "occlusions": [{"agent": 1, "first": 30, "last": 59}],
  "noise": {"position_sigma": 0.0, "dropout": 0.0, "false_positive_rate": 0.0}
})";

}  // namespace

TEST_CASE("run config parsing") {
  const RunConfig d = run_config_from_json(json::object());
  CHECK(d.tracker.match_thresh == 1.0);
  CHECK(d.tracker.max_failure_frames == 100);
  CHECK(d.losses.keypoints3d_pa == 260.0);
  CHECK(d.anchor.bins == 64);
  const RunConfig c = run_config_from_json(json::parse(R"({"tracker": {"mode": "offline"}, "maps": {"D": 32}})"));
  CHECK(c.tracker.mode == TrackingMode::kOffline);
  CHECK(c.anchor.bins == 32);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"trakcer": {}})")), Error);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"tracker": {"mode": "sometimes"}})")), Error);
  // Echo round trip.
  const RunConfig back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
}

TEST_CASE("shipped configs load") {
  const fs::path dir = TRAJKIT_CONFIG_DIR;
  // default.json should stay in step with the compiled defaults.
  CHECK(to_json(load_run_config(dir / "default.json")) == to_json(RunConfig{}));
  CHECK_NOTHROW(scene_config_from_json(parse_json_file(dir / "scenes" / "walkers.json")));
  const json seqs = parse_json_file(dir / "dyna3dpw_sequences.json");
  CHECK(seqs.at("sequences").size() == 16);
}

TEST_CASE("detection records reject non-finite values with a line number") {
  const fs::path dir = workdir("nan");
  spit(dir / "d.jsonl", "{\"frame\": 0, \"detections\": []}\n{\"frame\": 1, \"detections\": [{\"t\": [0, 0, NaN], \"c\": 1, \"dm\": [0,0,0]}]}\n");
  JsonlReader r(dir / "d.jsonl");
  json j;
  CHECK(r.next(j));
  try {
    r.next(j);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("tracks record round trip") {
  FrameTracks f;
  f.frame = 4;
  f.tracks = {{1, Vec3(0.1, 0.2, 3), false, true, 0}, {2, Vec3(1, 0, 4), true, false, -1}};
  const FrameTracks back = parse_tracks_record(tracks_record(f));
  REQUIRE(back.tracks.size() == 2);
  CHECK(back.tracks[1].interpolated);
  CHECK(back.tracks[0].position == f.tracks[0].position);
  json dup = tracks_record(f);
  dup["tracks"][1]["id"] = 1;
  CHECK_THROWS_AS(parse_tracks_record(dup), Error);
}

TEST_CASE("simulate writes one record per frame, deterministically") {
  const fs::path dir = workdir("simulate");
  spit(dir / "scene.json", kOneAgent);
  REQUIRE(run(dir, "simulate " + (dir / "scene.json").string() + " --out " + (dir / "a").string()) == 0);
  CHECK(read_jsonl(dir / "a" / "gt.jsonl").size() == 40);
  CHECK(read_jsonl(dir / "a" / "detections.jsonl").size() == 40);
  CHECK(fs::exists(dir / "a" / "subjects.json"));

  // Noisy run, twice with the same seed.
  spit(dir / "cfg.json", R"({"seed": 5})");
  json scene = json::parse(kOneAgent);
  scene["noise"] = {{"position_sigma", 0.05}, {"dropout", 0.1}, {"false_positive_rate", 1.0}};
  spit(dir / "noisy.json", scene.dump());
  const std::string args = "simulate " + (dir / "noisy.json").string() + " --config " + (dir / "cfg.json").string();
  REQUIRE(run(dir, args + " --out " + (dir / "n1").string()) == 0);
  REQUIRE(run(dir, args + " --out " + (dir / "n2").string()) == 0);
  CHECK(slurp(dir / "n1" / "detections.jsonl") == slurp(dir / "n2" / "detections.jsonl"));
  CHECK(slurp(dir / "n1" / "gt.jsonl") == slurp(dir / "n2" / "gt.jsonl"));
  CHECK(slurp(dir / "n1" / "detections.jsonl") != slurp(dir / "a" / "detections.jsonl"));
  REQUIRE(run(dir, args + " --seed 6 --out " + (dir / "n3").string()) == 0);
  CHECK(slurp(dir / "n1" / "detections.jsonl") != slurp(dir / "n3" / "detections.jsonl"));
}

TEST_CASE("occlusion flags follow the scene script") {
  const fs::path dir = workdir("occl");
  spit(dir / "scene.json", kOcclusion);
  REQUIRE(run(dir, "simulate " + (dir / "scene.json").string() + " --out " + (dir / "o").string()) == 0);
  const auto gt = read_jsonl(dir / "o" / "gt.jsonl");
  REQUIRE(gt.size() == 90);
  for (const json& rec : gt) {
    const int f = rec["frame"];
    for (const json& a : rec["agents"]) {
      const bool hidden = a["id"] == 1 && f >= 30 && f <= 59;
      CHECK(a["visible"].get<bool>() == !hidden);
      CHECK(a["in_frustum"].get<bool>());
    }
  }

  // Offline tracking interpolates the gap.
  const fs::path o = dir / "o";
  REQUIRE(run(dir, "track " + (o / "detections.jsonl").string() + " --subjects " + (o / "subjects.json").string() +
                       " --mode offline --out " + (o / "tracks.jsonl").string()) == 0);
  const auto tracks = read_jsonl(o / "tracks.jsonl");
  REQUIRE(tracks.size() == 90);
  for (const json& rec : tracks) {
    const int f = rec["frame"];
    REQUIRE(rec["tracks"].size() == 2);
    const json& t1 = rec["tracks"][0];
    CHECK(t1["id"] == 1);
    CHECK(t1["interp"].get<bool>() == (f >= 30 && f <= 59));
  }
}

TEST_CASE("track, eval: noiseless runs score perfectly") {
  const fs::path dir = workdir("track");
  spit(dir / "scene.json", kOcclusion);
  const fs::path o = dir / "o";
  REQUIRE(run(dir, "simulate " + (dir / "scene.json").string() + " --out " + o.string()) == 0);
  // Drop the occlusion so the input has no gaps.
  json scene = json::parse(kOcclusion);
  scene.erase("occlusions");
  spit(dir / "clear.json", scene.dump());
  const fs::path c = dir / "c";
  REQUIRE(run(dir, "simulate " + (dir / "clear.json").string() + " --out " + c.string()) == 0);

  const std::string common = "track " + (c / "detections.jsonl").string() + " --subjects " + (c / "subjects.json").string();
  REQUIRE(run(dir, common + " --mode online --out " + (c / "on.jsonl").string()) == 0);
  REQUIRE(run(dir, common + " --mode offline --out " + (c / "off.jsonl").string() + " --trajectories " +
                       (c / "traj.jsonl").string() + " --csv " + (c / "traj.csv").string() + " --no-smooth") == 0);
  CHECK(slurp(c / "on.jsonl") == slurp(c / "off.jsonl"));
  CHECK(slurp(c / "traj.csv").rfind("frame,id,x,y,z,tx,ty,tz\n", 0) == 0);

  // Tracks equal the ground-truth ids and camera positions.
  const auto gt = read_jsonl(c / "gt.jsonl");
  const auto tr = read_jsonl(c / "on.jsonl");
  REQUIRE(gt.size() == tr.size());
  for (std::size_t f = 0; f < gt.size(); ++f) {
    REQUIRE(tr[f]["tracks"].size() == gt[f]["agents"].size());
    for (std::size_t k = 0; k < gt[f]["agents"].size(); ++k) {
      CHECK(tr[f]["tracks"][k]["id"] == gt[f]["agents"][k]["id"]);
      for (int x = 0; x < 3; ++x) {
        CHECK(tr[f]["tracks"][k]["t"][x].get<double>() == doctest::Approx(gt[f]["agents"][k]["cam"][x].get<double>()).epsilon(1e-12));
      }
    }
  }

  REQUIRE(run(dir, "eval --pred " + (c / "on.jsonl").string() + " --gt " + (c / "gt.jsonl").string() + " --out " +
                       (dir / "report.json").string()) == 0);
  json rep = json::parse(slurp(dir / "report.json"));
  CHECK(rep["aggregate"]["mota"] == 1.0);
  CHECK(rep["aggregate"]["idf1"] == 1.0);
  CHECK(rep["aggregate"]["hota"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.contains("config"));

  REQUIRE(run(dir, "eval --metrics ate --pred " + (c / "traj.jsonl").string() + " --gt " + (c / "gt.jsonl").string() +
                       " --out " + (dir / "ate.json").string()) == 0);
  rep = json::parse(slurp(dir / "ate.json"));
  CHECK(rep["aggregate"]["ate"].get<double>() < 1e-9);
  CHECK_FALSE(rep["aggregate"].contains("mota"));
  CHECK_FALSE(rep["sequences"][0].contains("hota"));

  // Frame mismatch names the first offending frame.
  CHECK(run(dir, "eval --pred " + (c / "on.jsonl").string() + " --gt " + (o / "gt.jsonl").string()) == 0);
  const auto lines = read_jsonl(c / "on.jsonl");
  std::string shifted;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    json l = lines[i];
    if (i >= 12) l["frame"] = l["frame"].get<int>() + 1;
    shifted += l.dump() + "\n";
  }
  spit(dir / "shifted.jsonl", shifted);
  CHECK(run(dir, "eval --pred " + (dir / "shifted.jsonl").string() + " --gt " + (c / "gt.jsonl").string()) == 3);
  CHECK(slurp(dir / "stderr.txt").find("frame 12") != std::string::npos);
}

TEST_CASE("eval hand case: ten frames, two misses") {
  const fs::path dir = workdir("hand");
  std::ofstream g(dir / "gt.jsonl"), p(dir / "pred.jsonl");
  for (int f = 0; f < 10; ++f) {
    GroundTruthFrame gf;
    gf.frame = f;
    gf.K = make_intrinsics(50, 512, 512);
    AgentState a;
    a.id = 1;
    a.world = a.camera = Vec3(0.1 * f, 0, 4);
    a.in_frustum = a.visible = true;
    a.pixel = project_point(gf.K, a.camera);
    gf.agents.push_back(a);
    g << gt_record(gf).dump() << "\n";
    FrameTracks t;
    t.frame = f;
    if (f != 3 && f != 4) t.tracks.push_back({9, a.camera, false, true, 0});
    p << tracks_record(t).dump() << "\n";
  }
  g.close();
  p.close();
  REQUIRE(run(dir, "eval --metrics mota --pred " + (dir / "pred.jsonl").string() + " --gt " + (dir / "gt.jsonl").string() +
                       " --out " + (dir / "r.json").string()) == 0);
  const json rep = json::parse(slurp(dir / "r.json"));
  CHECK(rep["sequences"][0]["mota"].get<double>() == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(rep["sequences"][0]["misses"] == 2);
}

TEST_CASE("error exits") {
  const fs::path dir = workdir("errors");
  // Malformed config: line-anchored message, data error.
  spit(dir / "scene.json", kOneAgent);
  spit(dir / "bad.json", "{\n  \"seed\": 1,\n  oops\n}\n");
  CHECK(run(dir, "simulate " + (dir / "scene.json").string() + " --config " + (dir / "bad.json").string() + " --out " +
                     (dir / "x").string()) == 3);
  CHECK(slurp(dir / "stderr.txt").find("bad.json:3:") != std::string::npos);

  // Unknown subcommand: usage.
  CHECK(run(dir, "frobnicate") == 2);

  // Subject with no detection in the first frame.
  REQUIRE(run(dir, "simulate " + (dir / "scene.json").string() + " --out " + (dir / "s").string()) == 0);
  spit(dir / "subjects.json", R"([{"id": 1, "t": [3, 0, 5]}])");
  CHECK(run(dir, "track " + (dir / "s" / "detections.jsonl").string() + " --subjects " + (dir / "subjects.json").string() +
                     " --out " + (dir / "t.jsonl").string()) == 3);
  CHECK(slurp(dir / "stderr.txt").find("initialization") != std::string::npos);

  // Invalid field of view.
  CHECK(run(dir, "project --fov 190 --out " + (dir / "g").string()) == 3);
}

TEST_CASE("project writes a panorama grid") {
  const fs::path dir = workdir("project");
  REQUIRE(run(dir, "project --fov 50 --width 65 --height 33 --out " + (dir / "id").string()) == 0);
  const RawMap g = read_raw_map(dir / "id");
  REQUIRE(g.shape == std::vector<int>{2, 33, 65});
  const std::size_t plane = 33 * 65;
  const std::size_t center = 16 * 65 + 32;
  CHECK(g.data[center] == doctest::Approx(1024.0));
  CHECK(g.data[plane + center] == doctest::Approx(512.0));

  REQUIRE(run(dir, "project --yaw 90 --width 65 --height 33 --out " + (dir / "l").string()) == 0);
  REQUIRE(run(dir, "project --yaw -90 --width 65 --height 33 --out " + (dir / "r").string()) == 0);
  const RawMap l = read_raw_map(dir / "l"), r = read_raw_map(dir / "r");
  for (int i = 0; i < 33; ++i) {
    for (int j = 0; j < 65; ++j) {
      const std::size_t a = static_cast<std::size_t>(i * 65 + j), b = static_cast<std::size_t>(i * 65 + (64 - j));
      // Columns mirror about the panorama center; rows agree.
      CHECK(l.data[a] == doctest::Approx(2048.0 - r.data[b]).epsilon(1e-5));
      CHECK(l.data[plane + a] == doctest::Approx(r.data[plane + b]));
    }
  }
  // Byte-identical rewrite.
  write_raw_map(dir / "copy", read_raw_map(dir / "id"));
  CHECK(slurp(dir / "copy.bin") == slurp(dir / "id.bin"));
  CHECK(slurp(dir / "copy.json") == slurp(dir / "id.json"));
}

TEST_CASE("eval-losses reports weighted terms") {
  const fs::path dir = workdir("losses");
  spit(dir / "in.json", R"({"parts": {"motion_offset": 0.01, "pose": 0.5}})");
  REQUIRE(run(dir, "eval-losses " + (dir / "in.json").string() + " --out " + (dir / "out.json").string()) == 0);
  const json r = json::parse(slurp(dir / "out.json"));
  CHECK(r["total"].get<double>() == doctest::Approx(300 * 0.01 + 80 * 0.5));
}
