#include "trajkit/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "trajkit/assignment.hpp"
#include "trajkit/errors.hpp"

namespace trajkit {

void validate(const TrackerConfig& cfg) {
  if (cfg.conf_thresh < 0 || cfg.scale_thresh < 0 || cfg.duplicate_thresh < 0 || cfg.match_thresh < 0 ||
      cfg.max_failure_frames < 0 || (cfg.weights.array() < 0).any()) {
    fail(ErrorKind::kInvalidArgument, "tracker thresholds and weights must be non-negative");
  }
}

Vec3 depth_transform(const Vec3& t) {
  if (!(t.z() > -1.0)) fail(ErrorKind::kInvalidArgument, "depth_transform: z must exceed -1");
  return {t.x(), t.y(), 1.0 / (1.0 + t.z())};
}

Vec3 weighted_embedding(const Vec3& t, const TrackerConfig& cfg) {
  return cfg.weights.cwiseProduct(depth_transform(t));
}

std::vector<Detection> filter_detections(std::span<const Detection> dets, const TrackerConfig& cfg) {
  std::vector<Detection> out;
  for (const Detection& d : dets) {
    if (d.confidence < cfg.conf_thresh) continue;
    if (!(d.position.z() > 0.0) || 1.0 / d.position.z() < cfg.scale_thresh) continue;
    out.push_back(d);
  }
  return out;
}

namespace {

double duplicate_distance(const Detection& a, const Detection& b, const TrackerConfig& cfg) {
  if (cfg.duplicate_space == DuplicateSpace::kRawMeters) return (a.position - b.position).norm();
  return (weighted_embedding(a.position, cfg) - weighted_embedding(b.position, cfg)).norm();
}

// Indices kept by duplicate suppression, in input order.
std::vector<int> suppress_indices(std::span<const Detection> dets, const TrackerConfig& cfg) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dets[static_cast<std::size_t>(a)].confidence > dets[static_cast<std::size_t>(b)].confidence;
  });
  std::vector<int> kept;
  for (int i : order) {
    bool dup = false;
    for (int k : kept) {
      if (duplicate_distance(dets[static_cast<std::size_t>(i)], dets[static_cast<std::size_t>(k)], cfg) <
          cfg.duplicate_thresh) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(i);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

std::vector<Detection> suppress_duplicates(std::span<const Detection> dets, const TrackerConfig& cfg) {
  std::vector<Detection> out;
  for (int i : suppress_indices(dets, cfg)) out.push_back(dets[static_cast<std::size_t>(i)]);
  return out;
}

MatchResult match_step(std::span<const MemoryNode> nodes, std::span<const Detection> dets,
                       const TrackerConfig& cfg) {
  MatchResult r;
  const auto n = static_cast<Eigen::Index>(nodes.size());
  const auto m = static_cast<Eigen::Index>(dets.size());
  r.cost.resize(n, m);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vec3 a = weighted_embedding(nodes[static_cast<std::size_t>(k)].position, cfg);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Detection& d = dets[static_cast<std::size_t>(j)];
      r.cost(k, j) = (a - weighted_embedding(d.position - d.motion_offset, cfg)).norm();
    }
  }
  const Assignment a = solve_assignment(r.cost);
  std::vector<char> det_used(static_cast<std::size_t>(m), 0);
  for (Eigen::Index k = 0; k < n; ++k) {
    const int j = a.row_to_col.empty() ? -1 : a.row_to_col[static_cast<std::size_t>(k)];
    if (j >= 0 && r.cost(k, j) <= cfg.match_thresh) {
      r.pairs.emplace_back(static_cast<int>(k), j);
      det_used[static_cast<std::size_t>(j)] = 1;
    } else {
      r.unmatched_nodes.push_back(static_cast<int>(k));
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!det_used[static_cast<std::size_t>(j)]) r.unmatched_dets.push_back(static_cast<int>(j));
  }
  return r;
}

std::vector<MemoryNode> update_memory(std::vector<MemoryNode>& nodes, std::span<const Detection> dets,
                                      const MatchResult& matches, const TrackerConfig& cfg, int frame,
                                      bool record_history, std::span<const int> detection_indices) {
  std::vector<int> matched_det(nodes.size(), -1);
  for (const auto& [k, j] : matches.pairs) matched_det[static_cast<std::size_t>(k)] = j;

  for (std::size_t k = 0; k < nodes.size(); ++k) {
    MemoryNode& node = nodes[k];
    const int j = matched_det[k];
    if (j >= 0) {
      const Detection& d = dets[static_cast<std::size_t>(j)];
      node.position = d.position;
      node.confidence = d.confidence;
      node.failure_time = 0;
    } else {
      ++node.failure_time;
    }
  }

  std::vector<MemoryNode> removed;
  std::vector<MemoryNode> alive;
  alive.reserve(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    MemoryNode& node = nodes[k];
    if (node.failure_time > cfg.max_failure_frames) {
      removed.push_back(std::move(node));
      continue;
    }
    if (record_history) {
      HistoryEntry e;
      e.frame = frame;
      e.position = node.position;
      e.matched = matched_det[k] >= 0;
      if (e.matched) {
        const int j = matched_det[k];
        e.detection_index = detection_indices.empty() ? j : detection_indices[static_cast<std::size_t>(j)];
      }
      node.history.push_back(e);
    }
    alive.push_back(std::move(node));
  }
  nodes = std::move(alive);
  return removed;
}

void interpolate_gap(MemoryNode& node, TrackingMode mode) {
  if (mode != TrackingMode::kOffline) {
    fail(ErrorKind::kModeViolation, "gap interpolation requires offline mode");
  }
  auto& h = node.history;
  std::size_t last_matched = h.size();
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!h[i].matched) continue;
    if (last_matched < h.size() && i > last_matched + 1) {
      const HistoryEntry& a = h[last_matched];
      const HistoryEntry& b = h[i];
      const double span = static_cast<double>(b.frame - a.frame);
      for (std::size_t g = last_matched + 1; g < i; ++g) {
        const double s = static_cast<double>(h[g].frame - a.frame) / span;
        h[g].position = a.position + s * (b.position - a.position);
        h[g].interpolated = true;
      }
    }
    last_matched = i;
  }
}

TrackerSession::TrackerSession(TrackerConfig cfg, std::vector<Subject> subjects)
    : cfg_(std::move(cfg)), subjects_(std::move(subjects)) {
  validate(cfg_);
  if (subjects_.empty()) fail(ErrorKind::kInitialization, "at least one subject is required");
  std::vector<int> ids;
  for (const Subject& s : subjects_) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    fail(ErrorKind::kInitialization, "subject ids must be unique");
  }
}

namespace {

// Filtered, de-duplicated detections plus their indices in the raw input.
struct Prepared {
  std::vector<Detection> dets;
  std::vector<int> source;
};

Prepared prepare(std::span<const Detection> raw, const TrackerConfig& cfg) {
  std::vector<Detection> filtered;
  std::vector<int> filtered_src;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const Detection one[1] = {raw[i]};
    if (!filter_detections(one, cfg).empty()) {
      filtered.push_back(raw[i]);
      filtered_src.push_back(static_cast<int>(i));
    }
  }
  Prepared p;
  for (int k : suppress_indices(filtered, cfg)) {
    p.dets.push_back(filtered[static_cast<std::size_t>(k)]);
    p.source.push_back(filtered_src[static_cast<std::size_t>(k)]);
  }
  return p;
}

FrameTracks online_view(int frame, const std::vector<MemoryNode>& nodes, const std::vector<int>& det_index) {
  FrameTracks out;
  out.frame = frame;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    TrackEntry e;
    e.id = nodes[k].id;
    e.position = nodes[k].position;
    e.matched = det_index[k] >= 0;
    e.detection_index = det_index[k];
    out.tracks.push_back(e);
  }
  std::sort(out.tracks.begin(), out.tracks.end(),
            [](const TrackEntry& a, const TrackEntry& b) { return a.id < b.id; });
  return out;
}

}  // namespace

std::vector<int> TrackerSession::initialize(int frame, std::span<const Detection> raw) {
  const Prepared p = prepare(raw, cfg_);
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(subjects_.size()), static_cast<Eigen::Index>(p.dets.size()));
  for (std::size_t s = 0; s < subjects_.size(); ++s) {
    const Vec3 a = weighted_embedding(subjects_[s].position, cfg_);
    for (std::size_t j = 0; j < p.dets.size(); ++j) {
      cost(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) =
          (a - weighted_embedding(p.dets[j].position, cfg_)).norm();
    }
  }
  const Assignment a = solve_assignment(cost);
  nodes_.clear();
  std::vector<int> source;
  for (std::size_t s = 0; s < subjects_.size(); ++s) {
    const int j = a.row_to_col.empty() ? -1 : a.row_to_col[s];
    if (j < 0 || cost(static_cast<Eigen::Index>(s), j) > cfg_.match_thresh) {
      fail(ErrorKind::kInitialization,
           "subject " + std::to_string(subjects_[s].id) + " has no matching detection in the first frame");
    }
    const Detection& d = p.dets[static_cast<std::size_t>(j)];
    MemoryNode node;
    node.id = subjects_[s].id;
    node.position = d.position;
    node.confidence = d.confidence;
    if (cfg_.mode == TrackingMode::kOffline) {
      node.history.push_back({frame, d.position, true, false, p.source[static_cast<std::size_t>(j)]});
    }
    nodes_.push_back(std::move(node));
    source.push_back(p.source[static_cast<std::size_t>(j)]);
  }
  initialized_ = true;
  last_frame_ = frame;
  return source;
}

FrameTracks TrackerSession::step(int frame, std::span<const Detection> dets) {
  if (!initialized_) return online_view(frame, nodes_, initialize(frame, dets));
  if (frame <= last_frame_) fail(ErrorKind::kInvalidArgument, "frames must be strictly increasing");
  last_frame_ = frame;

  const Prepared p = prepare(dets, cfg_);
  const MatchResult m = match_step(nodes_, p.dets, cfg_);
  std::map<int, int> id_to_det;
  for (const auto& [k, j] : m.pairs) {
    id_to_det[nodes_[static_cast<std::size_t>(k)].id] = p.source[static_cast<std::size_t>(j)];
  }
  auto removed = update_memory(nodes_, p.dets, m, cfg_, frame, cfg_.mode == TrackingMode::kOffline, p.source);
  for (auto& r : removed) retired_.push_back(std::move(r));

  std::vector<int> det_index;
  for (const MemoryNode& n : nodes_) {
    const auto it = id_to_det.find(n.id);
    det_index.push_back(it == id_to_det.end() ? -1 : it->second);
  }
  return online_view(frame, nodes_, det_index);
}

TrackOutput TrackerSession::finish() {
  TrackOutput out;
  if (cfg_.mode != TrackingMode::kOffline) return out;
  std::vector<MemoryNode> all = retired_;
  all.insert(all.end(), nodes_.begin(), nodes_.end());
  std::map<int, std::vector<TrackEntry>> by_frame;
  for (MemoryNode& node : all) {
    interpolate_gap(node, cfg_.mode);
    for (const HistoryEntry& h : node.history) {
      by_frame[h.frame].push_back({node.id, h.position, h.interpolated, h.matched, h.detection_index});
    }
  }
  for (auto& [frame, tracks] : by_frame) {
    std::sort(tracks.begin(), tracks.end(), [](const TrackEntry& a, const TrackEntry& b) { return a.id < b.id; });
    out.push_back({frame, std::move(tracks)});
  }
  return out;
}

TrackOutput track_sequence(std::span<const FrameDetections> frames, std::span<const Subject> subjects,
                           const TrackerConfig& cfg) {
  TrackerSession session(cfg, {subjects.begin(), subjects.end()});
  TrackOutput online;
  for (const FrameDetections& f : frames) online.push_back(session.step(f.frame, f.detections));
  if (cfg.mode == TrackingMode::kOffline) {
    // Frames where every node has been retired still appear, empty.
    TrackOutput offline = session.finish();
    TrackOutput out;
    std::size_t k = 0;
    for (const FrameDetections& f : frames) {
      if (k < offline.size() && offline[k].frame == f.frame) {
        out.push_back(std::move(offline[k++]));
      } else {
        out.push_back({f.frame, {}});
      }
    }
    return out;
  }
  return online;
}

}  // namespace trajkit
