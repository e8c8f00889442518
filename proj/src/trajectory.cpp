#include "trajkit/trajectory.hpp"

#include <cmath>
#include <limits>

#include "trajkit/errors.hpp"

namespace trajkit {

std::vector<Vec3> GlobalTrajectory::positions() const {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.position);
  return out;
}

std::vector<Vec3> accumulate_world(const Vec3& start, std::span<const Vec3> offsets) {
  std::vector<Vec3> out;
  out.reserve(offsets.size() + 1);
  out.push_back(start);
  for (const Vec3& d : offsets) {
    if (!d.allFinite()) fail(ErrorKind::kInvalidArgument, "accumulate_world: non-finite offset");
    out.push_back(out.back() + d);
  }
  return out;
}

std::vector<Vec3> finite_diff(std::span<const Vec3> seq, int order) {
  if (order != 1 && order != 2) fail(ErrorKind::kInvalidArgument, "finite_diff: order must be 1 or 2");
  if (seq.size() < static_cast<std::size_t>(order) + 1) {
    fail(ErrorKind::kInsufficientData, "finite_diff: sequence too short");
  }
  std::vector<Vec3> out;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) out.push_back(seq[i + 1] - seq[i]);
  if (order == 2) return finite_diff(out, 1);
  return out;
}

void validate(const OneEuroParams& p) {
  if (!(p.min_cutoff > 0 && p.beta >= 0 && p.d_cutoff > 0 && p.sample_rate > 0)) {
    fail(ErrorKind::kInvalidArgument, "One-Euro parameters must be positive");
  }
}

OneEuroFilter::OneEuroFilter(const OneEuroParams& params) : params_(params) { validate(params_); }

double OneEuroFilter::alpha(double cutoff) const {
  const double tau = 1.0 / (2.0 * kPi * cutoff);
  return 1.0 / (1.0 + tau * params_.sample_rate);
}

double OneEuroFilter::filter(double x) {
  if (!initialized_) {
    initialized_ = true;
    x_hat_ = x;
    dx_hat_ = 0.0;
    return x;
  }
  const double dx = (x - x_hat_) * params_.sample_rate;
  const double ad = alpha(params_.d_cutoff);
  dx_hat_ = ad * dx + (1.0 - ad) * dx_hat_;
  const double a = alpha(params_.min_cutoff + params_.beta * std::abs(dx_hat_));
  x_hat_ = a * x + (1.0 - a) * x_hat_;
  return x_hat_;
}

std::vector<Eigen::VectorXd> one_euro_filter(std::span<const Eigen::VectorXd> signal,
                                             const OneEuroParams& params) {
  std::vector<Eigen::VectorXd> out;
  if (signal.empty()) return out;
  const auto dim = signal.front().size();
  std::vector<OneEuroFilter> filters(static_cast<std::size_t>(dim), OneEuroFilter(params));
  for (const auto& x : signal) {
    if (x.size() != dim) fail(ErrorKind::kInvalidArgument, "one_euro_filter: ragged signal");
    Eigen::VectorXd y(dim);
    for (Eigen::Index c = 0; c < dim; ++c) y(c) = filters[static_cast<std::size_t>(c)].filter(x(c));
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<Vec3> one_euro_filter(std::span<const Vec3> signal, const OneEuroParams& params) {
  std::vector<OneEuroFilter> filters(3, OneEuroFilter(params));
  std::vector<Vec3> out;
  out.reserve(signal.size());
  for (const Vec3& x : signal) {
    out.emplace_back(filters[0].filter(x.x()), filters[1].filter(x.y()), filters[2].filter(x.z()));
  }
  return out;
}

std::vector<Vec3> unwrap_axis_angle(std::span<const Vec3> seq) {
  std::vector<Vec3> out;
  out.reserve(seq.size());
  for (const Vec3& r : seq) {
    const double angle = r.norm();
    if (out.empty() || angle < 1e-12) {
      out.push_back(r);
      continue;
    }
    const Vec3 axis = r / angle;
    const Vec3& prev = out.back();
    // The previous value may already sit several turns away.
    const double k0 = std::round((axis.dot(prev) - angle) / (2.0 * kPi));
    Vec3 best = r;
    double best_d = std::numeric_limits<double>::infinity();
    for (double k = k0 - 1; k <= k0 + 1; k += 1.0) {
      const Vec3 cand = axis * (angle + 2.0 * kPi * k);
      const double d = (cand - prev).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = cand;
      }
    }
    out.push_back(best);
  }
  return out;
}

GlobalTrajectory smooth_trajectory(const GlobalTrajectory& traj, const OneEuroParams& params) {
  std::vector<Vec3> pos, rot;
  for (const auto& p : traj.points) {
    pos.push_back(p.position);
    rot.push_back(p.orientation);
  }
  const auto pos_s = one_euro_filter(pos, params);
  const auto rot_s = one_euro_filter(unwrap_axis_angle(rot), params);
  GlobalTrajectory out = traj;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    out.points[i].position = pos_s[i];
    out.points[i].orientation = rot_s[i];
  }
  return out;
}

std::vector<GlobalTrajectory> assemble(const TrackOutput& track, std::span<const FrameWorldSamples> world) {
  if (world.size() != track.size()) fail(ErrorKind::kInvalidArgument, "assemble: frame counts differ");
  std::map<int, GlobalTrajectory> by_id;
  for (std::size_t f = 0; f < track.size(); ++f) {
    const FrameTracks& ft = track[f];
    if (world[f].frame != ft.frame) {
      fail(ErrorKind::kInvalidArgument, "assemble: world samples misaligned at frame " + std::to_string(ft.frame));
    }
    for (const TrackEntry& e : ft.tracks) {
      const auto sample = world[f].by_id.find(e.id);
      const bool has = sample != world[f].by_id.end();
      auto [it, fresh] = by_id.try_emplace(e.id);
      GlobalTrajectory& g = it->second;
      TrajectoryPoint p;
      p.frame = ft.frame;
      if (fresh) {
        g.id = e.id;
        p.position = e.position;
        p.orientation = has ? sample->second.orientation : Vec3::Zero();
        p.valid = true;
      } else {
        const TrajectoryPoint& prev = g.points.back();
        p.position = prev.position + (has ? sample->second.translation_offset : Vec3::Zero());
        p.orientation = has ? sample->second.orientation : prev.orientation;
        p.valid = has;
      }
      g.points.push_back(p);
    }
  }
  std::vector<GlobalTrajectory> out;
  for (auto& [id, g] : by_id) out.push_back(std::move(g));
  return out;
}

std::vector<FrameWorldSamples> world_samples_from_tracks(const TrackOutput& track,
                                                         std::span<const std::vector<WorldSample>> per_frame) {
  if (per_frame.size() != track.size()) {
    fail(ErrorKind::kInvalidArgument, "world_samples_from_tracks: frame counts differ");
  }
  std::vector<FrameWorldSamples> out;
  for (std::size_t f = 0; f < track.size(); ++f) {
    FrameWorldSamples s;
    s.frame = track[f].frame;
    for (const TrackEntry& e : track[f].tracks) {
      if (!e.matched || e.detection_index < 0) continue;
      const auto idx = static_cast<std::size_t>(e.detection_index);
      if (idx >= per_frame[f].size()) {
        fail(ErrorKind::kInvalidArgument, "world_samples_from_tracks: detection index out of range");
      }
      s.by_id[e.id] = per_frame[f][idx];
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace trajkit
