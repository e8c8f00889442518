#include "cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <map>
#include <sstream>

#include "trajkit/errors.hpp"

namespace trajkit::cli {

namespace {

[[noreturn]] void parse_fail(const std::string& where, const std::string& what) {
  fail(ErrorKind::kParse, where + ": " + what);
}

void check_object(const json& j, const std::string& where) {
  if (!j.is_object()) parse_fail(where, "expected an object");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  check_object(j, where);
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      parse_fail(where, "unknown key '" + key + "'");
    }
  }
}

double num(const json& j, const std::string& where) {
  if (!j.is_number()) parse_fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) parse_fail(where, "non-finite number");
  return v;
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) parse_fail(where, "expected an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) parse_fail(where, "expected true or false");
  return j.get<bool>();
}

std::string str(const json& j, const std::string& where) {
  if (!j.is_string()) parse_fail(where, "expected a string");
  return j.get<std::string>();
}

Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) parse_fail(where, "expected an array of 3 numbers");
  return {num(j[0], where), num(j[1], where), num(j[2], where)};
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

template <class T, class F>
void opt(const json& j, const char* key, T& out, F conv, const std::string& where) {
  const auto it = j.find(key);
  if (it != j.end()) out = conv(*it, where + "." + key);
}

}  // namespace

void require_finite(const json& j, const std::string& where) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) parse_fail(where, "non-finite number");
  if (j.is_structured()) {
    for (const auto& v : j) require_finite(v, where);
  }
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  check_keys(j, {"tracker", "maps", "metrics", "losses", "one_euro", "seed"}, "config");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) parse_fail("config.seed", "expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("tracker")) {
    const json& t = j["tracker"];
    const std::string w = "config.tracker";
    check_keys(t, {"conf_thresh", "scale_thresh", "duplicate_thresh", "match_thresh", "max_failure_frames", "weights",
                   "mode", "duplicate_space"},
               w);
    opt(t, "conf_thresh", c.tracker.conf_thresh, num, w);
    opt(t, "scale_thresh", c.tracker.scale_thresh, num, w);
    opt(t, "duplicate_thresh", c.tracker.duplicate_thresh, num, w);
    opt(t, "match_thresh", c.tracker.match_thresh, num, w);
    opt(t, "max_failure_frames", c.tracker.max_failure_frames, integer, w);
    opt(t, "weights", c.tracker.weights, vec3, w);
    if (t.contains("mode")) {
      const std::string m = str(t["mode"], w + ".mode");
      if (m == "online") c.tracker.mode = TrackingMode::kOnline;
      else if (m == "offline") c.tracker.mode = TrackingMode::kOffline;
      else parse_fail(w + ".mode", "expected online or offline");
    }
    if (t.contains("duplicate_space")) {
      const std::string m = str(t["duplicate_space"], w + ".duplicate_space");
      if (m == "weighted") c.tracker.duplicate_space = DuplicateSpace::kWeighted;
      else if (m == "meters") c.tracker.duplicate_space = DuplicateSpace::kRawMeters;
      else parse_fail(w + ".duplicate_space", "expected weighted or meters");
    }
  }
  if (j.contains("maps")) {
    const json& m = j["maps"];
    const std::string w = "config.maps";
    check_keys(m, {"D", "H", "W", "C", "z_max", "conf_thresh", "nms_kernel", "composition", "sigma"}, w);
    opt(m, "D", c.dims.D, integer, w);
    opt(m, "H", c.dims.H, integer, w);
    opt(m, "W", c.dims.W, integer, w);
    opt(m, "C", c.dims.C, integer, w);
    opt(m, "z_max", c.anchor.z_max, num, w);
    opt(m, "conf_thresh", c.decode.conf_thresh, num, w);
    opt(m, "nms_kernel", c.decode.nms_kernel, integer, w);
    opt(m, "sigma", c.render_sigma, num, w);
    if (m.contains("composition")) {
      const std::string s = str(m["composition"], w + ".composition");
      if (s == "product") c.decode.composition = Composition::kProduct;
      else if (s == "mean") c.decode.composition = Composition::kMean;
      else parse_fail(w + ".composition", "expected product or mean");
    }
  }
  c.anchor.bins = c.dims.D;
  if (j.contains("metrics")) {
    const json& m = j["metrics"];
    check_keys(m, {"match_distance", "hota_dist_max"}, "config.metrics");
    opt(m, "match_distance", c.match_distance, num, "config.metrics");
    opt(m, "hota_dist_max", c.hota.dist_max, num, "config.metrics");
  }
  if (j.contains("losses")) {
    const json& l = j["losses"];
    const std::string w = "config.losses";
    check_keys(l, {"w_m", "w_W", "w_mpj", "w_cm", "w_pmpj", "w_pj2d", "w_prior", "w_theta", "w_beta"}, w);
    opt(l, "w_m", c.losses.motion_offset, num, w);
    opt(l, "w_W", c.losses.world_motion, num, w);
    opt(l, "w_mpj", c.losses.keypoints3d, num, w);
    opt(l, "w_cm", c.losses.center_map, num, w);
    opt(l, "w_pmpj", c.losses.keypoints3d_pa, num, w);
    opt(l, "w_pj2d", c.losses.keypoints2d, num, w);
    opt(l, "w_prior", c.losses.pose_prior, num, w);
    opt(l, "w_theta", c.losses.pose, num, w);
    opt(l, "w_beta", c.losses.shape, num, w);
  }
  if (j.contains("one_euro")) {
    const json& o = j["one_euro"];
    const std::string w = "config.one_euro";
    check_keys(o, {"min_cutoff", "beta", "d_cutoff", "sample_rate"}, w);
    opt(o, "min_cutoff", c.one_euro.min_cutoff, num, w);
    opt(o, "beta", c.one_euro.beta, num, w);
    opt(o, "d_cutoff", c.one_euro.d_cutoff, num, w);
    opt(o, "sample_rate", c.one_euro.sample_rate, num, w);
  }
  validate(c.tracker);
  validate(c.dims);
  validate(c.losses);
  validate(c.one_euro);
  if (!(c.match_distance > 0.0) || !(c.hota.dist_max > 0.0)) {
    fail(ErrorKind::kInvalidArgument, "metric distances must be positive");
  }
  if (!(c.anchor.z_max > 0.0)) fail(ErrorKind::kInvalidArgument, "z_max must be positive");
  return c;
}

json to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"tracker",
       {{"conf_thresh", c.tracker.conf_thresh},
        {"scale_thresh", c.tracker.scale_thresh},
        {"duplicate_thresh", c.tracker.duplicate_thresh},
        {"match_thresh", c.tracker.match_thresh},
        {"max_failure_frames", c.tracker.max_failure_frames},
        {"weights", to_json(c.tracker.weights)},
        {"mode", c.tracker.mode == TrackingMode::kOnline ? "online" : "offline"},
        {"duplicate_space", c.tracker.duplicate_space == DuplicateSpace::kWeighted ? "weighted" : "meters"}}},
      {"maps",
       {{"D", c.dims.D},
        {"H", c.dims.H},
        {"W", c.dims.W},
        {"C", c.dims.C},
        {"z_max", c.anchor.z_max},
        {"conf_thresh", c.decode.conf_thresh},
        {"nms_kernel", c.decode.nms_kernel},
        {"composition", c.decode.composition == Composition::kProduct ? "product" : "mean"},
        {"sigma", c.render_sigma}}},
      {"metrics", {{"match_distance", c.match_distance}, {"hota_dist_max", c.hota.dist_max}}},
      {"losses",
       {{"w_m", c.losses.motion_offset},
        {"w_W", c.losses.world_motion},
        {"w_mpj", c.losses.keypoints3d},
        {"w_cm", c.losses.center_map},
        {"w_pmpj", c.losses.keypoints3d_pa},
        {"w_pj2d", c.losses.keypoints2d},
        {"w_prior", c.losses.pose_prior},
        {"w_theta", c.losses.pose},
        {"w_beta", c.losses.shape}}},
      {"one_euro",
       {{"min_cutoff", c.one_euro.min_cutoff},
        {"beta", c.one_euro.beta},
        {"d_cutoff", c.one_euro.d_cutoff},
        {"sample_rate", c.one_euro.sample_rate}}},
  };
}

json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kParse, path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    json j = json::parse(text);
    require_finite(j, path.string());
    return j;
  } catch (const json::parse_error& e) {
    // Byte offset -> line:column.
    const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
    const auto nl = text.rfind('\n', pos == 0 ? 0 : pos - 1);
    const std::size_t col = nl == std::string::npos ? pos + 1 : pos - nl;
    fail(ErrorKind::kParse, path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON");
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (path.empty()) return {};
  return run_config_from_json(parse_json_file(path));
}

SceneConfig scene_config_from_json(const json& j) {
  SceneConfig c;
  SceneScript& s = c.scene;
  check_keys(j, {"duration", "frame_rate", "width", "height", "agents", "camera", "occlusions", "noise"}, "scene");
  if (!j.contains("duration")) parse_fail("scene", "missing 'duration'");
  s.duration = integer(j["duration"], "scene.duration");
  opt(j, "frame_rate", s.frame_rate, num, "scene");
  opt(j, "width", s.width, integer, "scene");
  opt(j, "height", s.height, integer, "scene");
  if (j.contains("agents")) {
    if (!j["agents"].is_array()) parse_fail("scene.agents", "expected an array");
    for (std::size_t i = 0; i < j["agents"].size(); ++i) {
      const json& a = j["agents"][i];
      const std::string w = "scene.agents[" + std::to_string(i) + "]";
      check_keys(a, {"id", "interpolation", "path"}, w);
      AgentScript agent;
      if (!a.contains("id") || !a.contains("path")) parse_fail(w, "needs 'id' and 'path'");
      agent.id = integer(a["id"], w + ".id");
      if (a.contains("interpolation")) {
        const std::string m = str(a["interpolation"], w + ".interpolation");
        if (m == "linear") agent.interpolation = Interpolation::kLinear;
        else if (m == "cubic") agent.interpolation = Interpolation::kCubic;
        else parse_fail(w + ".interpolation", "expected linear or cubic");
      }
      if (!a["path"].is_array()) parse_fail(w + ".path", "expected an array");
      for (const json& p : a["path"]) {
        check_keys(p, {"t", "p"}, w + ".path");
        if (!p.contains("t") || !p.contains("p")) parse_fail(w + ".path", "waypoints need 't' and 'p'");
        agent.path.push_back({num(p["t"], w + ".path.t"), vec3(p["p"], w + ".path.p")});
      }
      s.agents.push_back(std::move(agent));
    }
  }
  if (j.contains("camera")) {
    if (!j["camera"].is_array()) parse_fail("scene.camera", "expected an array");
    for (const json& k : j["camera"]) {
      const std::string w = "scene.camera";
      check_keys(k, {"t", "yaw", "pitch", "roll", "position", "fov"}, w);
      CameraKeyframe key;
      opt(k, "t", key.time, num, w);
      opt(k, "yaw", key.yaw, num, w);
      opt(k, "pitch", key.pitch, num, w);
      opt(k, "roll", key.roll, num, w);
      opt(k, "position", key.position, vec3, w);
      opt(k, "fov", key.fov_deg, num, w);
      s.camera.push_back(key);
    }
  }
  if (j.contains("occlusions")) {
    if (!j["occlusions"].is_array()) parse_fail("scene.occlusions", "expected an array");
    for (const json& o : j["occlusions"]) {
      const std::string w = "scene.occlusions";
      check_keys(o, {"agent", "first", "last"}, w);
      if (!o.contains("agent") || !o.contains("first") || !o.contains("last")) parse_fail(w, "needs agent, first, last");
      s.occlusions.push_back({integer(o["agent"], w), integer(o["first"], w), integer(o["last"], w)});
    }
  }
  if (j.contains("noise")) {
    const json& n = j["noise"];
    const std::string w = "scene.noise";
    check_keys(n, {"position_sigma", "confidence_jitter", "dropout", "false_positive_rate", "fp_min_depth", "fp_max_depth"}, w);
    NoiseModel m;
    opt(n, "position_sigma", m.position_sigma, num, w);
    opt(n, "confidence_jitter", m.confidence_jitter, num, w);
    opt(n, "dropout", m.dropout, num, w);
    opt(n, "false_positive_rate", m.false_positive_rate, num, w);
    opt(n, "fp_min_depth", m.fp_min_depth, num, w);
    opt(n, "fp_max_depth", m.fp_max_depth, num, w);
    validate(m);
    c.noise = m;
  }
  validate(s);
  return c;
}

std::vector<Subject> subjects_from_json(const json& j) {
  const json& list = j.is_object() && j.contains("subjects") ? j["subjects"] : j;
  if (!list.is_array()) parse_fail("subjects", "expected an array");
  std::vector<Subject> out;
  for (const json& s : list) {
    check_keys(s, {"id", "t"}, "subjects");
    if (!s.contains("id") || !s.contains("t")) parse_fail("subjects", "entries need 'id' and 't'");
    out.push_back({integer(s["id"], "subjects.id"), vec3(s["t"], "subjects.t")});
  }
  return out;
}

json subjects_to_json(std::span<const Subject> subjects) {
  json list = json::array();
  for (const Subject& s : subjects) list.push_back({{"id", s.id}, {"t", to_json(s.position)}});
  return {{"subjects", list}};
}

JsonlReader::JsonlReader(const std::filesystem::path& path) : in_(path), name_(path.string()) {
  if (!in_) fail(ErrorKind::kParse, name_ + ": cannot open");
}

bool JsonlReader::next(json& out) {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out = json::parse(text);
    } catch (const json::parse_error&) {
      fail(ErrorKind::kParse, location(*this) + ": invalid JSON (NaN and Inf are not allowed)");
    }
    require_finite(out, location(*this));
    return true;
  }
  return false;
}

std::string location(const JsonlReader& r) { return r.name() + ":" + std::to_string(r.line()); }

json detections_record(const FrameDetections& frame, const std::vector<WorldSample>* world) {
  json dets = json::array();
  for (std::size_t i = 0; i < frame.detections.size(); ++i) {
    const Detection& d = frame.detections[i];
    json e = {{"t", to_json(d.position)}, {"c", d.confidence}, {"dm", to_json(d.motion_offset)}};
    if (world) {
      e["tau"] = to_json((*world)[i].orientation);
      e["dT"] = to_json((*world)[i].translation_offset);
    }
    dets.push_back(std::move(e));
  }
  return {{"frame", frame.frame}, {"detections", dets}};
}

DetectionRecord parse_detections_record(const json& j) {
  check_keys(j, {"frame", "detections"}, "record");
  if (!j.contains("frame") || !j.contains("detections")) parse_fail("record", "needs 'frame' and 'detections'");
  DetectionRecord r;
  r.frame.frame = integer(j["frame"], "frame");
  if (!j["detections"].is_array()) parse_fail("detections", "expected an array");
  for (const json& e : j["detections"]) {
    check_keys(e, {"t", "c", "dm", "tau", "dT"}, "detection");
    if (!e.contains("t") || !e.contains("c")) parse_fail("detection", "needs 't' and 'c'");
    Detection d;
    d.position = vec3(e["t"], "detection.t");
    d.confidence = num(e["c"], "detection.c");
    if (e.contains("dm")) d.motion_offset = vec3(e["dm"], "detection.dm");
    r.frame.detections.push_back(d);
    if (e.contains("tau") != e.contains("dT")) parse_fail("detection", "'tau' and 'dT' come together");
    if (e.contains("tau")) {
      r.world.push_back(WorldSample{vec3(e["tau"], "detection.tau"), vec3(e["dT"], "detection.dT")});
    } else {
      r.world.push_back(std::nullopt);
    }
  }
  return r;
}

json tracks_record(const FrameTracks& frame) {
  json tracks = json::array();
  for (const TrackEntry& t : frame.tracks) {
    tracks.push_back({{"id", t.id}, {"t", to_json(t.position)}, {"interp", t.interpolated}});
  }
  return {{"frame", frame.frame}, {"tracks", tracks}};
}

FrameTracks parse_tracks_record(const json& j) {
  check_keys(j, {"frame", "tracks"}, "record");
  if (!j.contains("frame") || !j.contains("tracks")) parse_fail("record", "needs 'frame' and 'tracks'");
  FrameTracks f;
  f.frame = integer(j["frame"], "frame");
  if (!j["tracks"].is_array()) parse_fail("tracks", "expected an array");
  for (const json& e : j["tracks"]) {
    check_keys(e, {"id", "t", "interp"}, "track");
    if (!e.contains("id") || !e.contains("t")) parse_fail("track", "needs 'id' and 't'");
    TrackEntry t;
    t.id = integer(e["id"], "track.id");
    t.position = vec3(e["t"], "track.t");
    if (e.contains("interp")) t.interpolated = boolean(e["interp"], "track.interp");
    for (const TrackEntry& other : f.tracks) {
      if (other.id == t.id) parse_fail("tracks", "duplicate id " + std::to_string(t.id));
    }
    f.tracks.push_back(t);
  }
  return f;
}

json gt_record(const GroundTruthFrame& frame) {
  json R = json::array();
  for (int r = 0; r < 3; ++r) R.push_back(json::array({frame.pose.rotation(r, 0), frame.pose.rotation(r, 1), frame.pose.rotation(r, 2)}));
  json agents = json::array();
  for (const AgentState& a : frame.agents) {
    agents.push_back({{"id", a.id},
                      {"world", to_json(a.world)},
                      {"cam", to_json(a.camera)},
                      {"visible", a.visible},
                      {"in_frustum", a.in_frustum},
                      {"px", a.pixel ? json::array({a.pixel->x(), a.pixel->y()}) : json(nullptr)},
                      {"tau", to_json(a.orientation)}});
  }
  return {{"frame", frame.frame},
          {"camera", {{"R", R}, {"t", to_json(frame.pose.translation)}, {"fov", frame.K.fov_deg}}},
          {"agents", agents}};
}

GtRecord parse_gt_record(const json& j) {
  check_keys(j, {"frame", "camera", "agents"}, "record");
  if (!j.contains("frame") || !j.contains("agents")) parse_fail("record", "needs 'frame' and 'agents'");
  GtRecord r;
  r.frame = integer(j["frame"], "frame");
  if (j.contains("camera")) {
    const json& c = j["camera"];
    check_keys(c, {"R", "t", "fov"}, "camera");
    if (c.contains("R")) {
      const json& R = c["R"];
      if (!R.is_array() || R.size() != 3) parse_fail("camera.R", "expected 3 rows");
      for (int row = 0; row < 3; ++row) r.pose.rotation.row(row) = vec3(R[static_cast<std::size_t>(row)], "camera.R").transpose();
    }
    opt(c, "t", r.pose.translation, vec3, "camera");
    opt(c, "fov", r.fov, num, "camera");
  }
  if (!j["agents"].is_array()) parse_fail("agents", "expected an array");
  for (const json& a : j["agents"]) {
    check_keys(a, {"id", "world", "cam", "visible", "in_frustum", "px", "tau"}, "agent");
    if (!a.contains("id")) parse_fail("agent", "needs 'id'");
    GtRecord::Agent g;
    g.id = integer(a["id"], "agent.id");
    opt(a, "world", g.world, vec3, "agent");
    opt(a, "cam", g.cam, vec3, "agent");
    opt(a, "tau", g.tau, vec3, "agent");
    g.visible = a.contains("visible") ? boolean(a["visible"], "agent.visible") : true;
    g.in_frustum = a.contains("in_frustum") ? boolean(a["in_frustum"], "agent.in_frustum") : g.visible;
    r.agents.push_back(g);
  }
  return r;
}

json trajectories_record(int frame, std::span<const TrajectoryRecordEntry> entries) {
  json list = json::array();
  for (const auto& e : entries) {
    list.push_back({{"id", e.id}, {"T", to_json(e.T)}, {"tau", to_json(e.tau)}, {"valid", e.valid}});
  }
  return {{"frame", frame}, {"trajectories", list}};
}

std::vector<std::pair<int, std::vector<TrajectoryRecordEntry>>> by_frame(std::span<const GlobalTrajectory> trajs) {
  std::map<int, std::vector<TrajectoryRecordEntry>> rows;
  for (const GlobalTrajectory& g : trajs) {
    for (const TrajectoryPoint& p : g.points) rows[p.frame].push_back({g.id, p.position, p.orientation, p.valid});
  }
  std::vector<std::pair<int, std::vector<TrajectoryRecordEntry>>> out(rows.begin(), rows.end());
  for (auto& [f, list] : out) {
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  }
  return out;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kParse, path.string() + ": cannot write");
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorKind::kParse, path.string() + ": write failed");
}

}  // namespace trajkit::cli
