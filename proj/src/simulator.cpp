#include "trajkit/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "trajkit/errors.hpp"

namespace trajkit {

namespace {

void check_times(const std::vector<double>& times, const char* what) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) fail(ErrorKind::kInvalidArgument, std::string(what) + ": times must increase strictly");
  }
}

// Segment i such that times[i] <= t < times[i + 1], with t already clamped.
std::size_t segment(std::span<const double> times, double t) {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - times.begin()) - 1));
  return std::min(i, times.size() - 2);
}

}  // namespace

void validate(const SceneScript& scene) {
  if (scene.duration < 1) fail(ErrorKind::kInvalidArgument, "scene duration must be at least one frame");
  if (!(scene.frame_rate > 0.0)) fail(ErrorKind::kInvalidArgument, "frame_rate must be positive");
  if (scene.width < 1 || scene.height < 1) fail(ErrorKind::kInvalidArgument, "image size must be positive");
  std::set<int> ids;
  for (const AgentScript& a : scene.agents) {
    if (!ids.insert(a.id).second) fail(ErrorKind::kInvalidArgument, "duplicate agent id " + std::to_string(a.id));
    if (a.path.empty()) fail(ErrorKind::kInvalidArgument, "agent " + std::to_string(a.id) + " has no waypoints");
    std::vector<double> t;
    for (const Waypoint& w : a.path) {
      if (!w.position.allFinite() || !std::isfinite(w.time)) fail(ErrorKind::kInvalidArgument, "non-finite waypoint");
      t.push_back(w.time);
    }
    check_times(t, "waypoints");
  }
  std::vector<double> t;
  for (const CameraKeyframe& k : scene.camera) {
    if (!(k.fov_deg > 0.0 && k.fov_deg < 180.0)) fail(ErrorKind::kInvalidArgument, "camera fov must lie in (0, 180)");
    if (!k.position.allFinite()) fail(ErrorKind::kInvalidArgument, "non-finite camera position");
    t.push_back(k.time);
  }
  check_times(t, "camera keyframes");
  for (const OcclusionInterval& o : scene.occlusions) {
    if (!ids.count(o.agent_id)) fail(ErrorKind::kInvalidArgument, "occlusion for unknown agent " + std::to_string(o.agent_id));
    if (o.first < 0 || o.last < o.first || o.last >= scene.duration) {
      fail(ErrorKind::kInvalidArgument, "occlusion interval outside the scene");
    }
  }
}

Vec3 agent_position(const AgentScript& agent, double t) {
  const auto& P = agent.path;
  if (P.size() == 1 || t <= P.front().time) return P.front().position;
  if (t >= P.back().time) return P.back().position;
  std::vector<double> times;
  for (const auto& w : P) times.push_back(w.time);
  const std::size_t i = segment(times, t);
  const double h = times[i + 1] - times[i];
  const double s = (t - times[i]) / h;
  if (agent.interpolation == Interpolation::kLinear) return (1.0 - s) * P[i].position + s * P[i + 1].position;

  // Cubic Hermite with Catmull-Rom tangents on non-uniform times.
  auto tangent = [&](std::size_t k) -> Vec3 {
    const std::size_t a = k == 0 ? 0 : k - 1;
    const std::size_t b = std::min(k + 1, P.size() - 1);
    return (P[b].position - P[a].position) / (times[b] - times[a]);
  };
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * P[i].position + (s3 - 2 * s2 + s) * h * tangent(i) +
         (-2 * s3 + 3 * s2) * P[i + 1].position + (s3 - s2) * h * tangent(i + 1);
}

namespace {

struct CameraState {
  CameraPose pose;  // scene -> camera
  double fov_deg = 50.0;
};

CameraState camera_at(const std::vector<CameraKeyframe>& keys, double t) {
  if (keys.empty()) return {};
  auto pose_of = [](const CameraKeyframe& k) {
    return CameraPose::from_center(rotation_from_ypr(k.yaw, k.pitch, k.roll), k.position);
  };
  if (keys.size() == 1 || t <= keys.front().time) return {pose_of(keys.front()), keys.front().fov_deg};
  if (t >= keys.back().time) return {pose_of(keys.back()), keys.back().fov_deg};
  std::vector<double> times;
  for (const auto& k : keys) times.push_back(k.time);
  const std::size_t i = segment(times, t);
  const double s = (t - times[i]) / (times[i + 1] - times[i]);
  const Eigen::Quaterniond q0(rotation_from_ypr(keys[i].yaw, keys[i].pitch, keys[i].roll));
  const Eigen::Quaterniond q1(rotation_from_ypr(keys[i + 1].yaw, keys[i + 1].pitch, keys[i + 1].roll));
  const Mat3 orientation = q0.slerp(s, q1).toRotationMatrix();
  const Vec3 center = (1.0 - s) * keys[i].position + s * keys[i + 1].position;
  return {CameraPose::from_center(orientation, center), (1.0 - s) * keys[i].fov_deg + s * keys[i + 1].fov_deg};
}

bool occluded(const SceneScript& scene, int id, int frame) {
  for (const auto& o : scene.occlusions) {
    if (o.agent_id == id && frame >= o.first && frame <= o.last) return true;
  }
  return false;
}

}  // namespace

const AgentState* GroundTruthFrame::find(int id) const {
  for (const AgentState& a : agents) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

GroundTruthStream simulate_sequence(const SceneScript& scene) {
  validate(scene);
  GroundTruthStream out;
  out.frame_rate = scene.frame_rate;
  const CameraPose anchor = camera_at(scene.camera, 0.0).pose;
  const Mat3 R0t = anchor.rotation.transpose();

  // World positions first; headings need the neighbours.
  const auto n = static_cast<std::size_t>(scene.duration);
  std::vector<std::vector<Vec3>> world(scene.agents.size(), std::vector<Vec3>(n));
  for (std::size_t a = 0; a < scene.agents.size(); ++a) {
    for (std::size_t f = 0; f < n; ++f) {
      const Vec3 p = agent_position(scene.agents[a], static_cast<double>(f) / scene.frame_rate);
      world[a][f] = world_to_camera(anchor, p);
    }
  }
  // Heading follows the horizontal direction of travel; while an agent stands
  // still it keeps the last heading (or the first one it will take).
  std::vector<std::vector<double>> heading(scene.agents.size(), std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < scene.agents.size(); ++a) {
    std::optional<double> first, last;
    std::vector<std::optional<double>> h(n);
    for (std::size_t f = 0; f < n; ++f) {
      Vec3 v = Vec3::Zero();
      if (f + 1 < n) {
        v = world[a][f + 1] - world[a][f];
      } else if (f > 0) {
        v = world[a][f] - world[a][f - 1];
      }
      if (std::hypot(v.x(), v.z()) > 1e-9) {
        last = std::atan2(v.x(), v.z());
        if (!first) first = last;
      }
      h[f] = last;
    }
    for (std::size_t f = 0; f < n; ++f) heading[a][f] = h[f].value_or(first.value_or(0.0));
  }

  for (std::size_t f = 0; f < n; ++f) {
    const CameraState cam = camera_at(scene.camera, static_cast<double>(f) / scene.frame_rate);
    GroundTruthFrame frame;
    frame.frame = static_cast<int>(f);
    frame.pose.rotation = cam.pose.rotation * R0t;
    frame.pose.translation = cam.pose.translation - frame.pose.rotation * anchor.translation;
    frame.K = make_intrinsics(cam.fov_deg, scene.width, scene.height);
    for (std::size_t a = 0; a < scene.agents.size(); ++a) {
      AgentState s;
      s.id = scene.agents[a].id;
      s.world = world[a][f];
      s.camera = world_to_camera(frame.pose, s.world);
      s.orientation = Vec3(0.0, heading[a][f], 0.0);
      if (s.camera.z() > 0.0) {
        const Vec2 px = project_point(frame.K, s.camera);
        s.pixel = px;
        s.in_frustum = px.x() >= 0.0 && px.x() < scene.width && px.y() >= 0.0 && px.y() < scene.height;
      }
      s.occluded = occluded(scene, s.id, frame.frame);
      s.visible = s.in_frustum && !s.occluded;
      frame.agents.push_back(s);
    }
    out.frames.push_back(std::move(frame));
  }
  return out;
}

std::vector<Subject> subjects_from_stream(const GroundTruthStream& stream) {
  std::vector<Subject> out;
  if (stream.frames.empty()) return out;
  for (const AgentState& a : stream.frames.front().agents) {
    if (a.visible) out.push_back({a.id, a.camera});
  }
  return out;
}

WorldSample world_sample_at(const GroundTruthStream& stream, std::size_t f, int agent_id) {
  const AgentState* a = stream.frames.at(f).find(agent_id);
  if (!a) fail(ErrorKind::kInvalidArgument, "unknown agent " + std::to_string(agent_id));
  WorldSample s;
  s.orientation = a->orientation;
  if (f > 0) s.translation_offset = a->world - stream.frames[f - 1].find(agent_id)->world;
  return s;
}

namespace {

Vec3 motion_offset_at(const GroundTruthStream& stream, std::size_t f, const AgentState& a) {
  if (f == 0) return Vec3::Zero();
  return a.camera - stream.frames[f - 1].find(a.id)->camera;
}

}  // namespace

DetectionStream detections_from_stream(const GroundTruthStream& stream) {
  DetectionStream out;
  for (std::size_t f = 0; f < stream.frames.size(); ++f) {
    const GroundTruthFrame& gf = stream.frames[f];
    FrameDetections fd;
    fd.frame = gf.frame;
    std::vector<WorldSample> world;
    std::vector<int> source;
    for (const AgentState& a : gf.agents) {
      if (!a.visible) continue;
      Detection d;
      d.confidence = 1.0;
      d.position = a.camera;
      d.motion_offset = motion_offset_at(stream, f, a);
      fd.detections.push_back(d);
      world.push_back(world_sample_at(stream, f, a.id));
      source.push_back(a.id);
    }
    out.frames.push_back(std::move(fd));
    out.world.push_back(std::move(world));
    out.source.push_back(std::move(source));
  }
  return out;
}

namespace {

struct RenderedFrame {
  FrameMaps maps;
  std::vector<int> owner;
  std::vector<int> agent_ids;  // per rendered center
};

RenderedFrame render_frame(const GroundTruthStream& stream, std::size_t f, const MapDims& dims,
                           const DepthAnchor& anchor, double sigma) {
  const GroundTruthFrame& gf = stream.frames.at(f);
  RenderedFrame r;
  std::vector<Vec3> centers;
  std::vector<const AgentState*> agents;
  for (const AgentState& a : gf.agents) {
    if (!a.visible) continue;
    centers.push_back(a.camera);
    agents.push_back(&a);
    r.agent_ids.push_back(a.id);
  }
  CenterRender cr = render_center_map(centers, dims, anchor, gf.K, sigma, &r.owner);
  r.maps.center = std::move(cr.map);
  r.maps.localization = VectorMap3D(3, dims.D, dims.H, dims.W);
  r.maps.motion = VectorMap3D(3, dims.D, dims.H, dims.W);
  r.maps.world = make_world_motion_map(dims.H, dims.W);

  const int rad = gaussian_radius(sigma);
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const auto& cell = cr.cells[k];
    if (!cell) continue;
    const Vec3 motion = motion_offset_at(stream, f, *agents[k]);
    for (int d = std::max(0, cell->d - rad); d <= std::min(dims.D - 1, cell->d + rad); ++d) {
      for (int h = std::max(0, cell->h - rad); h <= std::min(dims.H - 1, cell->h + rad); ++h) {
        for (int w = std::max(0, cell->w - rad); w <= std::min(dims.W - 1, cell->w + rad); ++w) {
          const GridIndex g{d, h, w};
          if (r.owner[r.maps.center.offset(g)] != static_cast<int>(k)) continue;
          r.maps.localization.set(g, centers[k] - grid_to_camera(g, dims, anchor, gf.K));
          r.maps.motion.set(g, motion);
        }
      }
    }
    if (const auto fc = feature_cell(centers[k], dims, gf.K)) {
      const WorldSample ws = world_sample_at(stream, f, agents[k]->id);
      Eigen::VectorXd v(kWorldMotionChannels);
      v << ws.orientation, ws.translation_offset;
      r.maps.world.set(fc->first, fc->second, v);
    }
  }
  return r;
}

}  // namespace

FrameMaps render_ground_truth_maps(const GroundTruthStream& stream, std::size_t f, const MapDims& dims,
                                   const DepthAnchor& anchor, double sigma) {
  return render_frame(stream, f, dims, anchor, sigma).maps;
}

DetectionStream detections_via_maps(const GroundTruthStream& stream, const MapDims& dims, const DepthAnchor& anchor,
                                    const DecodeConfig& cfg, double sigma) {
  DetectionStream out;
  for (std::size_t f = 0; f < stream.frames.size(); ++f) {
    const RenderedFrame r = render_frame(stream, f, dims, anchor, sigma);
    FrameDecode dec = decode_frame(r.maps, dims, anchor, stream.frames[f].K, cfg);
    std::vector<int> source;
    for (const Detection& d : dec.detections) {
      const int k = r.owner[r.maps.center.offset(d.grid_index)];
      source.push_back(k < 0 ? -1 : r.agent_ids[static_cast<std::size_t>(k)]);
    }
    out.frames.push_back({stream.frames[f].frame, std::move(dec.detections)});
    out.world.push_back(std::move(dec.world));
    out.source.push_back(std::move(source));
  }
  return out;
}

void validate(const NoiseModel& noise) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(noise.position_sigma >= 0.0) || !(noise.confidence_jitter >= 0.0) || !prob(noise.dropout) ||
      !(noise.false_positive_rate >= 0.0)) {
    fail(ErrorKind::kInvalidArgument, "noise model: sigma and rates must be >= 0, dropout in [0, 1]");
  }
  if (!(noise.fp_min_depth > 0.0 && noise.fp_max_depth >= noise.fp_min_depth)) {
    fail(ErrorKind::kInvalidArgument, "noise model: bad false-positive depth range");
  }
}

DetectionStream corrupt_detections(const DetectionStream& clean, const NoiseModel& noise,
                                   std::span<const CameraIntrinsics> per_frame_K) {
  validate(noise);
  if (per_frame_K.size() != clean.frames.size()) fail(ErrorKind::kInvalidArgument, "corrupt_detections: intrinsics per frame required");
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::poisson_distribution<int> fp_count(noise.false_positive_rate > 0.0 ? noise.false_positive_rate : 1.0);

  DetectionStream out;
  for (std::size_t f = 0; f < clean.frames.size(); ++f) {
    FrameDetections fd;
    fd.frame = clean.frames[f].frame;
    std::vector<WorldSample> world;
    std::vector<int> source;
    const auto& dets = clean.frames[f].detections;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      // Draw everything up front so the stream of draws does not depend on
      // which detections survive.
      const double drop = unit(rng);
      const Vec3 n(gauss(rng), gauss(rng), gauss(rng));
      const double jitter = gauss(rng);
      if (drop < noise.dropout) continue;
      Detection d = dets[i];
      d.position += noise.position_sigma * n;
      d.confidence = std::clamp(d.confidence + noise.confidence_jitter * jitter, 0.0, 1.0);
      fd.detections.push_back(d);
      world.push_back(clean.world.empty() ? WorldSample{} : clean.world[f][i]);
      source.push_back(clean.source.empty() ? -1 : clean.source[f][i]);
    }
    const int fps = noise.false_positive_rate > 0.0 ? fp_count(rng) : 0;
    const CameraIntrinsics& K = per_frame_K[f];
    for (int k = 0; k < fps; ++k) {
      const double u = unit(rng) * K.width;
      const double v = unit(rng) * K.height;
      const double z = noise.fp_min_depth + unit(rng) * (noise.fp_max_depth - noise.fp_min_depth);
      Detection d;
      d.position = back_project(K, {u, v}, z);
      d.confidence = 1.0 - unit(rng);
      fd.detections.push_back(d);
      world.emplace_back();
      source.push_back(-1);
    }
    out.frames.push_back(std::move(fd));
    out.world.push_back(std::move(world));
    out.source.push_back(std::move(source));
  }
  return out;
}

DetectionStream corrupt_detections(const DetectionStream& clean, const NoiseModel& noise,
                                   const GroundTruthStream& stream) {
  std::vector<CameraIntrinsics> K;
  for (const auto& f : stream.frames) K.push_back(f.K);
  return corrupt_detections(clean, noise, K);
}

ProjectionGrid equirect_projection_grid(const Mat3& rotation, double fov_deg, int out_w, int out_h, int pano_w,
                                        int pano_h) {
  if (!is_rotation(rotation, 1e-6)) fail(ErrorKind::kInvalidArgument, "equirect grid: not a rotation");
  if (pano_w < 1 || pano_h < 1) fail(ErrorKind::kInvalidArgument, "equirect grid: panorama size must be positive");
  const CameraIntrinsics K = make_intrinsics(fov_deg, out_w, out_h);
  ProjectionGrid g;
  g.width = out_w;
  g.height = out_h;
  g.pano_width = pano_w;
  g.pano_height = pano_h;
  const std::size_t n = static_cast<std::size_t>(out_w) * static_cast<std::size_t>(out_h);
  g.directions.reserve(n);
  g.lon_lat.reserve(n);
  g.pano_xy.reserve(n);
  for (int i = 0; i < out_h; ++i) {
    for (int j = 0; j < out_w; ++j) {
      // Ray through the pixel center.
      const Vec3 ray((j + 0.5 - K.cx) / K.focal, (i + 0.5 - K.cy) / K.focal, 1.0);
      const Vec3 d = (rotation * ray).normalized();
      double lon = std::atan2(d.x(), d.z());
      if (lon >= kPi) lon -= 2.0 * kPi;
      const double lat = -std::asin(std::clamp(d.y(), -1.0, 1.0));
      g.directions.push_back(d);
      g.lon_lat.emplace_back(lon, lat);
      g.pano_xy.emplace_back((0.5 + lon / (2.0 * kPi)) * pano_w, (0.5 - lat / kPi) * pano_h);
    }
  }
  return g;
}

Eigen::MatrixXd remap_bilinear(const Eigen::MatrixXd& pano, const ProjectionGrid& grid) {
  if (pano.rows() != grid.pano_height || pano.cols() != grid.pano_width) {
    fail(ErrorKind::kInvalidArgument, "remap_bilinear: panorama size differs from the grid's");
  }
  const auto rows = static_cast<int>(pano.rows());
  const auto cols = static_cast<int>(pano.cols());
  Eigen::MatrixXd out(grid.height, grid.width);
  for (int i = 0; i < grid.height; ++i) {
    for (int j = 0; j < grid.width; ++j) {
      const Vec2& p = grid.pano_xy[grid.index(i, j)];
      const double x = p.x() - 0.5;
      const double y = std::clamp(p.y() - 0.5, 0.0, static_cast<double>(rows - 1));
      const double x0f = std::floor(x);
      const double y0f = std::floor(y);
      const double fx = x - x0f;
      const double fy = y - y0f;
      const int x0 = ((static_cast<int>(x0f) % cols) + cols) % cols;
      const int x1 = (x0 + 1) % cols;
      const int y0 = static_cast<int>(y0f);
      const int y1 = std::min(y0 + 1, rows - 1);
      out(i, j) = (1 - fy) * ((1 - fx) * pano(y0, x0) + fx * pano(y0, x1)) +
                  fy * ((1 - fx) * pano(y1, x0) + fx * pano(y1, x1));
    }
  }
  return out;
}

std::vector<CropWindow> sliding_window_camera(int full_w, int full_h, int window_w, int window_h,
                                              std::span<const Eigen::Vector2i> top_left) {
  if (window_w < 1 || window_h < 1 || window_w > full_w || window_h > full_h) {
    fail(ErrorKind::kInvalidArgument, "sliding window larger than the frame");
  }
  std::vector<CropWindow> out;
  for (std::size_t f = 0; f < top_left.size(); ++f) {
    const Eigen::Vector2i& o = top_left[f];
    if (o.x() < 0 || o.y() < 0 || o.x() + window_w > full_w || o.y() + window_h > full_h) {
      fail(ErrorKind::kInvalidArgument, "sliding window out of bounds at frame " + std::to_string(f));
    }
    CropWindow c{o.x(), o.y(), window_w, window_h, Vec2::Zero()};
    c.principal_shift = -(o - top_left.front()).cast<double>();
    out.push_back(c);
  }
  return out;
}

std::vector<SolvedPoint> solve_gt_world_trajectory(std::span<const PoseObservation> frames, const CameraIntrinsics& K,
                                                   const RansacConfig& ransac) {
  std::vector<SolvedPoint> out;
  for (const PoseObservation& obs : frames) {
    SolvedPoint p;
    try {
      const PnpResult r = pnp_translation_ransac(obs.joints_relative, obs.joints_2d, K, ransac);
      p.camera = r.translation;
      p.world = camera_to_world(obs.pose, r.translation);
      p.reprojection_error = r.mean_inlier_error;
      p.valid = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNoSolution && e.kind() != ErrorKind::kInsufficientData &&
          e.kind() != ErrorKind::kDegenerate) {
        throw;
      }
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace trajkit
