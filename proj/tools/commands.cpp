#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "cli_io.hpp"
#include "trajkit/map_io.hpp"

namespace trajkit::cli {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kParse:
    case ErrorKind::kInitialization:
    case ErrorKind::kModeViolation:
    case ErrorKind::kInsufficientData:
      return 3;
    case ErrorKind::kBehindCamera:
    case ErrorKind::kDegenerate:
    case ErrorKind::kNoSolution:
    case ErrorKind::kUndefinedMetric:
      return 4;
  }
  return 3;
}

namespace {

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorKind::kParse, p.string() + ": cannot write");
  return out;
}

void write_line(std::ofstream& out, const json& j) { out << j.dump() << '\n'; }

void write_meta(const fs::path& out, const std::string& command, const RunConfig& cfg, json inputs) {
  write_json_file(fs::path(out.string() + ".meta.json"),
                  {{"command", command}, {"config", to_json(cfg)}, {"inputs", std::move(inputs)}});
}

// Re-raises record-level parse errors with the file and line attached.
template <class F>
auto at_line(const JsonlReader& r, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    fail(e.kind(), location(r) + ": " + e.what());
  }
}

void check_increasing(const JsonlReader& r, std::optional<int>& last, int frame) {
  if (last && frame <= *last) fail(ErrorKind::kParse, location(r) + ": frames must increase strictly");
  last = frame;
}

}  // namespace

void cmd_simulate(const SimulateOptions& opt, std::ostream& log) {
  const RunConfig cfg = load_run_config(opt.config);
  const SceneConfig scene = scene_config_from_json(parse_json_file(opt.scene));
  const std::uint64_t seed = opt.seed.value_or(cfg.seed);

  const GroundTruthStream stream = simulate_sequence(scene.scene);
  DetectionStream dets = opt.via_maps ? detections_via_maps(stream, cfg.dims, cfg.anchor, cfg.decode, cfg.render_sigma)
                                      : detections_from_stream(stream);
  if (scene.noise) {
    NoiseModel noise = *scene.noise;
    noise.seed = seed;
    dets = corrupt_detections(dets, noise, stream);
  }

  fs::create_directories(opt.out_dir);
  {
    std::ofstream gt = open_out(opt.out_dir / "gt.jsonl");
    for (const auto& f : stream.frames) write_line(gt, gt_record(f));
  }
  {
    std::ofstream out = open_out(opt.out_dir / "detections.jsonl");
    for (std::size_t f = 0; f < dets.frames.size(); ++f) write_line(out, detections_record(dets.frames[f], &dets.world[f]));
  }
  write_json_file(opt.out_dir / "subjects.json", subjects_to_json(subjects_from_stream(stream)));
  write_meta(opt.out_dir / "detections.jsonl", "simulate", cfg,
             {{"scene", opt.scene.string()}, {"seed", seed}, {"via_maps", opt.via_maps}});

  if (opt.write_maps) {
    const fs::path dir = opt.out_dir / "maps";
    fs::create_directories(dir);
    for (std::size_t f = 0; f < stream.frames.size(); ++f) {
      const FrameMaps m = render_ground_truth_maps(stream, f, cfg.dims, cfg.anchor, cfg.render_sigma);
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%05d", stream.frames[f].frame);
      write_raw_map(dir / (std::string(name) + "_center"), to_raw(m.center));
      write_raw_map(dir / (std::string(name) + "_loc"), to_raw(m.localization, "localization"));
      write_raw_map(dir / (std::string(name) + "_motion"), to_raw(m.motion, "motion"));
      write_raw_map(dir / (std::string(name) + "_world"), to_raw(m.world, "world-motion"));
    }
  }

  std::size_t visible = 0, total = 0, detections = 0;
  for (const auto& f : stream.frames) {
    for (const auto& a : f.agents) {
      visible += a.visible ? 1 : 0;
      ++total;
    }
  }
  for (const auto& f : dets.frames) detections += f.detections.size();
  log << "agents " << scene.scene.agents.size() << ", frames " << stream.frames.size() << ", visible agent-frames "
      << visible << "/" << total << ", detections " << detections << "\n";
}

void cmd_track(const TrackOptions& opt, std::ostream& log) {
  RunConfig cfg = load_run_config(opt.config);
  if (opt.mode) cfg.tracker.mode = *opt.mode;
  const auto subjects = subjects_from_json(parse_json_file(opt.subjects));
  const bool want_traj = !opt.trajectories.empty() || !opt.csv.empty();
  const bool online = cfg.tracker.mode == TrackingMode::kOnline;

  TrackerSession session(cfg.tracker, subjects);
  JsonlReader reader(opt.detections);
  std::ofstream out = open_out(opt.out);
  TrackOutput kept;                                        // only when needed afterwards
  std::vector<int> frames;                                 // offline: to restore emptied frames
  std::vector<std::vector<std::optional<WorldSample>>> world;  // only for trajectories
  std::optional<int> last;
  json j;
  while (reader.next(j)) {
    DetectionRecord rec = at_line(reader, [&] { return parse_detections_record(j); });
    check_increasing(reader, last, rec.frame.frame);
    FrameTracks ft = at_line(reader, [&] { return session.step(rec.frame.frame, rec.frame.detections); });
    if (online) {
      write_line(out, tracks_record(ft));
      if (want_traj) kept.push_back(std::move(ft));
    } else {
      frames.push_back(rec.frame.frame);
    }
    if (want_traj) world.push_back(std::move(rec.world));
  }
  if (!last) fail(ErrorKind::kInitialization, opt.detections.string() + ": no frames");

  if (!online) {
    TrackOutput offline = session.finish();
    std::size_t k = 0;
    for (int f : frames) {
      FrameTracks ft{f, {}};
      if (k < offline.size() && offline[k].frame == f) ft = std::move(offline[k++]);
      write_line(out, tracks_record(ft));
      if (want_traj) kept.push_back(std::move(ft));
    }
  }
  write_meta(opt.out, "track", cfg, {{"detections", opt.detections.string()}, {"subjects", opt.subjects.string()}});

  std::size_t interp = 0;
  if (want_traj) {
    std::vector<FrameWorldSamples> samples;
    for (std::size_t f = 0; f < kept.size(); ++f) {
      FrameWorldSamples s;
      s.frame = kept[f].frame;
      for (const TrackEntry& e : kept[f].tracks) {
        if (!e.matched || e.detection_index < 0) continue;
        const auto& w = world[f][static_cast<std::size_t>(e.detection_index)];
        if (w) s.by_id[e.id] = *w;
      }
      samples.push_back(std::move(s));
    }
    std::vector<GlobalTrajectory> trajs = assemble(kept, samples);
    if (opt.smooth) {
      for (auto& t : trajs) t = smooth_trajectory(t, cfg.one_euro);
    }
    const auto rows = by_frame(trajs);
    if (!opt.trajectories.empty()) {
      std::ofstream tout = open_out(opt.trajectories);
      for (const auto& [frame, list] : rows) write_line(tout, trajectories_record(frame, list));
      write_meta(opt.trajectories, "track", cfg, {{"detections", opt.detections.string()}});
    }
    if (!opt.csv.empty()) {
      std::ofstream cout = open_out(opt.csv);
      cout << "frame,id,x,y,z,tx,ty,tz\n";
      char buf[256];
      for (const auto& [frame, list] : rows) {
        for (const auto& e : list) {
          std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", frame, e.id, e.T.x(), e.T.y(),
                        e.T.z(), e.tau.x(), e.tau.y(), e.tau.z());
          cout << buf;
        }
      }
    }
  }
  for (const auto& f : kept) {
    for (const auto& t : f.tracks) interp += t.interpolated ? 1 : 0;
  }
  log << "tracked " << subjects.size() << " subjects over " << (online ? "online" : "offline") << " input";
  if (want_traj) log << ", " << interp << " interpolated entries";
  log << "\n";
}

namespace {

enum class PredKind { kTracks, kTrajectories };

struct LoadedSequence {
  EvalSequence seq;
  PredKind kind = PredKind::kTracks;
};

LoadedSequence load_sequence(const fs::path& pred_path, const fs::path& gt_path) {
  JsonlReader pred(pred_path), gt(gt_path);
  LoadedSequence out;
  std::optional<PredKind> kind;
  json pj, gj;
  std::optional<int> last;
  while (true) {
    const bool hp = pred.next(pj);
    const bool hg = gt.next(gj);
    if (!hp && !hg) break;
    if (hp != hg) {
      fail(ErrorKind::kInvalidArgument, "frame mismatch: " + std::string(hp ? gt_path.string() : pred_path.string()) +
                                            " ends before frame " +
                                            std::to_string((hp ? pj : gj).value("frame", -1)));
    }
    if (!kind) kind = pj.contains("trajectories") ? PredKind::kTrajectories : PredKind::kTracks;
    const GtRecord g = at_line(gt, [&] { return parse_gt_record(gj); });
    EvalFrame f;
    f.frame = g.frame;
    if (*kind == PredKind::kTracks) {
      const FrameTracks t = at_line(pred, [&] { return parse_tracks_record(pj); });
      if (t.frame != g.frame) {
        fail(ErrorKind::kInvalidArgument, "frame mismatch at " + location(pred) + ": pred frame " +
                                              std::to_string(t.frame) + " vs gt frame " + std::to_string(g.frame));
      }
      for (const auto& e : t.tracks) f.pred.push_back({e.id, e.position, {}, {}});
    } else {
      const int frame = at_line(pred, [&] {
        if (!pj.contains("frame") || !pj["frame"].is_number_integer() || !pj.contains("trajectories")) {
          fail(ErrorKind::kParse, "record needs 'frame' and 'trajectories'");
        }
        return pj["frame"].get<int>();
      });
      if (frame != g.frame) {
        fail(ErrorKind::kInvalidArgument, "frame mismatch at " + location(pred) + ": pred frame " +
                                              std::to_string(frame) + " vs gt frame " + std::to_string(g.frame));
      }
      for (const json& e : pj["trajectories"]) {
        const std::vector<double> T = e.at("T").get<std::vector<double>>();
        if (T.size() != 3) fail(ErrorKind::kParse, location(pred) + ": T needs 3 numbers");
        f.pred.push_back({e.at("id").get<int>(), Vec3(T[0], T[1], T[2]), {}, {}});
      }
    }
    check_increasing(gt, last, g.frame);
    // Occluded agents still inside the frustum remain ground truth.
    for (const auto& a : g.agents) {
      if (a.in_frustum) f.gt.push_back({a.id, *kind == PredKind::kTracks ? a.cam : a.world, {}, {}});
    }
    out.seq.push_back(std::move(f));
  }
  out.kind = kind.value_or(PredKind::kTracks);
  validate(out.seq);
  return out;
}

}  // namespace

void cmd_eval(const EvalOptions& opt, std::ostream& os) {
  const RunConfig cfg = load_run_config(opt.config);
  if (opt.pred.size() != opt.gt.size() || opt.pred.empty()) {
    fail(ErrorKind::kInvalidArgument, "eval: give one --gt per --pred");
  }
  const std::set<std::string> known = {"mota", "idf1", "hota", "ate"};
  std::set<std::string> want(opt.metrics.begin(), opt.metrics.end());
  if (want.empty()) want = known;
  for (const auto& m : want) {
    if (!known.count(m)) fail(ErrorKind::kInvalidArgument, "unknown metric '" + m + "' (mota, idf1, hota, ate)");
  }

  json sequences = json::array();
  std::vector<ClearMot> motas;
  Idf1 id_sum;
  double hota_weighted = 0.0, hota_weight = 0.0;
  std::vector<double> all_ate;
  std::ofstream csv;
  if (!opt.csv.empty()) {
    csv = open_out(opt.csv);
    csv << "sequence,frame,id,x,y,z,gx,gy,gz\n";
  }

  for (std::size_t s = 0; s < opt.pred.size(); ++s) {
    const LoadedSequence loaded = load_sequence(opt.pred[s], opt.gt[s]);
    const EvalSequence& seq = loaded.seq;
    const auto assignment = match_frames(seq, cfg.match_distance);
    json r = {{"pred", opt.pred[s].string()}, {"gt", opt.gt[s].string()}, {"frames", seq.size()}};
    if (want.count("mota")) {
      const ClearMot m = clear_mot(seq, assignment);
      motas.push_back(m);
      r["mota"] = m.mota;
      r["id_switches"] = m.id_switches;
      r["misses"] = m.misses;
      r["false_positives"] = m.false_positives;
    }
    Idf1 id;
    if (want.count("idf1") || want.count("ate")) id = idf1(seq, assignment);
    if (want.count("idf1")) {
      r["idf1"] = id.idf1;
      id_sum.idtp += id.idtp;
      id_sum.idfp += id.idfp;
      id_sum.idfn += id.idfn;
    }
    if (want.count("hota")) {
      const Hota h = hota(seq, cfg.hota);
      r["hota"] = h.hota;
      r["deta"] = h.deta;
      r["assa"] = h.assa;
      double n = 0.0;
      for (const auto& f : seq) n += static_cast<double>(f.gt.size());
      hota_weighted += h.hota * n;
      hota_weight += n;
    }
    if (want.count("ate")) {
      const auto per = per_subject_ate(seq, id.gt_to_pred);
      json per_json = json::object();
      double mean = 0.0;
      for (const auto& [gid, e] : per) {
        per_json[std::to_string(gid)] = e;
        mean += e;
        all_ate.push_back(e);
      }
      r["ate"] = per.empty() ? json(nullptr) : json(mean / static_cast<double>(per.size()));
      r["ate_per_subject"] = per_json;
      if (csv.is_open()) {
        for (const auto& [gid, pid] : id.gt_to_pred) {
          std::vector<Vec3> p, g;
          std::vector<int> fr;
          for (const auto& f : seq) {
            const auto gi = std::find_if(f.gt.begin(), f.gt.end(), [&](const auto& o) { return o.id == gid; });
            const auto pi = std::find_if(f.pred.begin(), f.pred.end(), [&](const auto& o) { return o.id == pid; });
            if (gi == f.gt.end() || pi == f.pred.end()) continue;
            p.push_back(pi->position);
            g.push_back(gi->position);
            fr.push_back(f.frame);
          }
          if (p.size() < 3) continue;
          Points3 P(static_cast<Eigen::Index>(p.size()), 3), G(static_cast<Eigen::Index>(g.size()), 3);
          for (std::size_t i = 0; i < p.size(); ++i) {
            P.row(static_cast<Eigen::Index>(i)) = p[i].transpose();
            G.row(static_cast<Eigen::Index>(i)) = g[i].transpose();
          }
          const Points3 A = umeyama_align(P, G).apply(P);
          char buf[320];
          for (Eigen::Index i = 0; i < A.rows(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s,
                          fr[static_cast<std::size_t>(i)], gid, A(i, 0), A(i, 1), A(i, 2), G(i, 0), G(i, 1), G(i, 2));
            csv << buf;
          }
        }
      }
    }
    spdlog::debug("evaluated {} ({} frames)", opt.pred[s].string(), seq.size());
    sequences.push_back(std::move(r));
  }

  json agg = json::object();
  if (want.count("mota")) {
    const ClearMot m = aggregate(motas);
    agg["mota"] = m.mota;
    agg["id_switches"] = m.id_switches;
    agg["misses"] = m.misses;
    agg["false_positives"] = m.false_positives;
  }
  if (want.count("idf1")) {
    agg["idf1"] = 2.0 * id_sum.idtp / static_cast<double>(2 * id_sum.idtp + id_sum.idfp + id_sum.idfn);
  }
  if (want.count("hota")) agg["hota"] = hota_weighted / hota_weight;
  if (want.count("ate")) {
    double mean = 0.0;
    for (double e : all_ate) mean += e;
    agg["ate"] = all_ate.empty() ? json(nullptr) : json(mean / static_cast<double>(all_ate.size()));
  }
  const json report = {{"sequences", sequences}, {"aggregate", agg}, {"config", to_json(cfg)}};
  if (opt.out.empty()) {
    os << report.dump(2) << "\n";
  } else {
    write_json_file(opt.out, report);
  }
}

void cmd_project(const ProjectOptions& opt, std::ostream& log) {
  const Mat3 R = rotation_from_ypr(opt.yaw, opt.pitch, opt.roll);
  const ProjectionGrid g = equirect_projection_grid(R, opt.fov, opt.out_w, opt.out_h, opt.pano_w, opt.pano_h);
  RawMap raw;
  raw.kind = "equirect-grid";
  raw.shape = {2, opt.out_h, opt.out_w};
  raw.data.resize(2 * g.pano_xy.size());
  for (std::size_t i = 0; i < g.pano_xy.size(); ++i) {
    raw.data[i] = static_cast<float>(g.pano_xy[i].x());
    raw.data[g.pano_xy.size() + i] = static_cast<float>(g.pano_xy[i].y());
  }
  if (opt.out.has_parent_path()) fs::create_directories(opt.out.parent_path());
  write_raw_map(opt.out, raw);
  const Vec2& c = g.pano_xy[g.index(opt.out_h / 2, opt.out_w / 2)];
  log << "grid " << opt.out_w << "x" << opt.out_h << " -> panorama " << opt.pano_w << "x" << opt.pano_h
      << ", center pixel at (" << c.x() << ", " << c.y() << ")\n";
}

namespace {

std::vector<Vec3> vec3_list(const json& j, const std::string& where) {
  std::vector<Vec3> out;
  if (!j.is_array()) fail(ErrorKind::kParse, where + ": expected an array of [x, y, z]");
  for (const json& v : j) {
    const auto a = v.get<std::vector<double>>();
    if (a.size() != 3) fail(ErrorKind::kParse, where + ": expected [x, y, z]");
    out.emplace_back(a[0], a[1], a[2]);
  }
  return out;
}

std::vector<WorldMotionSequence> world_sequences(const json& j, const std::string& where) {
  std::vector<WorldMotionSequence> out;
  for (const json& s : j) {
    WorldMotionSequence w;
    w.positions = vec3_list(s.at("T"), where + ".T");
    w.orientations = s.contains("tau") ? vec3_list(s["tau"], where + ".tau")
                                        : std::vector<Vec3>(w.positions.size(), Vec3::Zero());
    if (s.contains("joints")) {
      for (const json& frame : s["joints"]) {
        const auto rows = vec3_list(frame, where + ".joints");
        Points3 J(static_cast<Eigen::Index>(rows.size()), 3);
        for (std::size_t i = 0; i < rows.size(); ++i) J.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        w.joints.push_back(J);
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

void cmd_eval_losses(const LossOptions& opt, std::ostream& os) {
  const RunConfig cfg = load_run_config(opt.config);
  const json in = parse_json_file(opt.input);
  std::map<std::string, double> parts;
  json report = json::object();
  try {
    if (in.contains("parts")) {
      for (const auto& [k, v] : in["parts"].items()) parts[k] = v.get<double>();
    }
    if (in.contains("world_motion")) {
      const json& w = in["world_motion"];
      const auto pred = world_sequences(w.at("pred"), "world_motion.pred");
      const auto target = world_sequences(w.at("target"), "world_motion.target");
      WorldMotionConfig wc;
      if (w.contains("foot_joints")) wc.foot_joints = w["foot_joints"].get<std::vector<int>>();
      const WorldMotionLoss l = world_motion_loss(pred, target, wc);
      json wm = json::object();
      for (int k = 0; k < kWorldPartCount; ++k) {
        const auto p = static_cast<WorldPart>(k);
        wm[world_part_name(p)] = l.has(p) ? json(l.part(p)) : json(nullptr);
      }
      wm["mean"] = l.total;
      report["world_motion"] = wm;
      add_world_parts(parts, l);
    }
    if (in.contains("params")) {
      for (const auto& [name, pv] : in["params"].items()) {
        const auto p = pv.at("pred").get<std::vector<double>>();
        const auto g = pv.at("gt").get<std::vector<double>>();
        parts[name] = param_l2_loss(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())),
                                    Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())));
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, opt.input.string() + ": " + e.what());
  }
  const TotalLoss t = total_loss(parts, cfg.losses);
  json terms = json::object();
  for (const auto& [name, value] : parts) {
    terms[name] = {{"value", value}, {"weight", loss_weight(name, cfg.losses)}, {"weighted", t.weighted.at(name)}};
  }
  report["terms"] = terms;
  report["total"] = t.total;
  report["config"] = to_json(cfg)["losses"];
  if (opt.out.empty()) {
    os << report.dump(2) << "\n";
  } else {
    write_json_file(opt.out, report);
  }
}

}  // namespace trajkit::cli
