#include "doctest.h"

#include "trajkit/errors.hpp"
#include "trajkit/tracker.hpp"

using namespace trajkit;

namespace {

Detection det(const Vec3& t, double conf = 1.0, const Vec3& dm = Vec3::Zero()) {
  Detection d;
  d.position = t;
  d.confidence = conf;
  d.motion_offset = dm;
  return d;
}

}  // namespace

TEST_CASE("depth transform and weighting") {
  const TrackerConfig cfg;
  const Vec3 p = depth_transform(Vec3(1, 2, 3));
  CHECK(p == Vec3(1, 2, 0.25));
  CHECK(weighted_embedding(Vec3(1, 2, 3), cfg).isApprox(Vec3(1.2, 5.0, 6.25)));
  CHECK_THROWS_AS(depth_transform(Vec3(0, 0, -1)), Error);
}

TEST_CASE("confidence and scale filtering") {
  const TrackerConfig cfg;
  const std::vector<Detection> in = {det({0, 0, 3}, 0.04), det({0, 0, 3}, 0.05), det({0, 0, 7.6}),
                                     det({0, 0, 7.8}), det({0, 0, -2})};
  const auto out = filter_detections(in, cfg);
  REQUIRE(out.size() == 2);
  CHECK(out[0].confidence == 0.05);
  CHECK(out[1].position.z() == 7.6);
}

TEST_CASE("duplicate suppression keeps the most confident") {
  TrackerConfig cfg;
  const std::vector<Detection> in = {det({0.0, 0, 3}, 0.6), det({0.02, 0, 3}, 0.9), det({1.0, 0, 3}, 0.5)};
  auto out = suppress_duplicates(in, cfg);
  REQUIRE(out.size() == 2);
  CHECK(out[0].confidence == 0.9);
  CHECK(out[1].confidence == 0.5);
  // In raw meters the same pair is also within 0.05.
  cfg.duplicate_space = DuplicateSpace::kRawMeters;
  CHECK(suppress_duplicates(in, cfg).size() == 2);
  // Depth differences shrink in the weighted space: 0.2 m apart at z=6
  // embeds 25*(1/7-1/7.2) ~ 0.099 apart.
  cfg.duplicate_space = DuplicateSpace::kWeighted;
  const std::vector<Detection> deep = {det({0, 0, 6.0}, 0.9), det({0, 0, 6.2}, 0.8)};
  CHECK(suppress_duplicates(deep, cfg).size() == 2);
}

TEST_CASE("matching compensates the motion offset") {
  const TrackerConfig cfg;
  MemoryNode a;
  a.id = 1;
  a.position = Vec3(0, 0, 4);
  MemoryNode b;
  b.id = 2;
  b.position = Vec3(0.6, 0, 4);
  const std::vector<MemoryNode> nodes = {a, b};
  // Both detections moved 0.3 m right; without compensation det 0 would be
  // equally close to both nodes.
  const std::vector<Detection> dets = {det({0.3, 0, 4}, 1, {0.3, 0, 0}), det({0.9, 0, 4}, 1, {0.3, 0, 0})};
  const MatchResult m = match_step(nodes, dets, cfg);
  REQUIRE(m.pairs.size() == 2);
  CHECK(m.pairs[0] == std::pair<int, int>{0, 0});
  CHECK(m.pairs[1] == std::pair<int, int>{1, 1});
  CHECK(m.cost(0, 0) == doctest::Approx(0.0));
  CHECK(m.cost(0, 1) == doctest::Approx(1.2 * 0.6));
}

TEST_CASE("assignments beyond the match threshold are dropped") {
  const TrackerConfig cfg;
  MemoryNode a;
  a.position = Vec3(0, 0, 4);
  const std::vector<MemoryNode> nodes = {a};
  const std::vector<Detection> far = {det({1.0, 0, 4})};  // 1.2 in weighted space
  const MatchResult m = match_step(nodes, far, cfg);
  CHECK(m.pairs.empty());
  CHECK(m.unmatched_nodes == std::vector<int>{0});
  CHECK(m.unmatched_dets == std::vector<int>{0});
}

TEST_CASE("failure timer and retirement") {
  TrackerConfig cfg;
  cfg.max_failure_frames = 3;
  std::vector<MemoryNode> nodes(1);
  nodes[0].id = 5;
  for (int f = 1; f <= 3; ++f) {
    const auto removed = update_memory(nodes, {}, MatchResult{}, cfg, f);
    CHECK(removed.empty());
  }
  CHECK(nodes[0].failure_time == 3);
  const auto removed = update_memory(nodes, {}, MatchResult{}, cfg, 4);
  CHECK(nodes.empty());
  REQUIRE(removed.size() == 1);
  CHECK(removed[0].id == 5);
}

TEST_CASE("a match resets the failure timer") {
  const TrackerConfig cfg;
  std::vector<MemoryNode> nodes(1);
  nodes[0].position = Vec3(0, 0, 3);
  nodes[0].failure_time = 7;
  const std::vector<Detection> dets = {det({0.1, 0, 3}, 0.7)};
  const MatchResult m = match_step(nodes, dets, cfg);
  update_memory(nodes, dets, m, cfg, 10);
  CHECK(nodes[0].failure_time == 0);
  CHECK(nodes[0].position == Vec3(0.1, 0, 3));
  CHECK(nodes[0].confidence == 0.7);
  REQUIRE(nodes[0].history.size() == 1);
  CHECK(nodes[0].history[0].matched);
}

TEST_CASE("gap interpolation is offline only") {
  MemoryNode n;
  n.history = {{0, Vec3(0, 0, 3), true, false, 0},
               {1, Vec3(0, 0, 3), false, false, -1},
               {2, Vec3(0, 0, 3), false, false, -1},
               {3, Vec3(3, 0, 6), true, false, 0},
               {4, Vec3(3, 0, 6), false, false, -1}};
  try {
    interpolate_gap(n, TrackingMode::kOnline);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kModeViolation);
  }
  interpolate_gap(n, TrackingMode::kOffline);
  CHECK(n.history[1].position.isApprox(Vec3(1, 0, 4)));
  CHECK(n.history[2].position.isApprox(Vec3(2, 0, 5)));
  CHECK(n.history[1].interpolated);
  // Trailing gap has no bounding match.
  CHECK_FALSE(n.history[4].interpolated);
  CHECK(n.history[4].position == Vec3(3, 0, 6));
}

TEST_CASE("session initialization") {
  TrackerConfig cfg;
  const std::vector<Subject> subjects = {{1, Vec3(0, 0, 3)}, {2, Vec3(1, 0, 5)}};
  TrackerSession s(cfg, subjects);
  const std::vector<Detection> first = {det({1.02, 0, 5}), det({0.01, 0, 3}), det({-1.5, 0, 4})};
  const FrameTracks f0 = s.step(0, first);
  REQUIRE(f0.tracks.size() == 2);
  CHECK(f0.tracks[0].id == 1);
  CHECK(f0.tracks[0].detection_index == 1);
  CHECK(f0.tracks[1].detection_index == 0);
  // Unmatched detections never create nodes.
  const FrameTracks f1 = s.step(1, first);
  CHECK(f1.tracks.size() == 2);
  CHECK_THROWS_AS(s.step(1, first), Error);

  TrackerSession missing(cfg, subjects);
  try {
    missing.step(0, std::vector<Detection>{det({0, 0, 3})});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInitialization);
  }
  CHECK_THROWS_AS(TrackerSession(cfg, {}), Error);
  CHECK_THROWS_AS(TrackerSession(cfg, {{1, Vec3(0, 0, 3)}, {1, Vec3(1, 0, 3)}}), Error);
}

TEST_CASE("offline tracking interpolates through a dropout") {
  TrackerConfig cfg;
  cfg.mode = TrackingMode::kOffline;
  std::vector<FrameDetections> frames;
  for (int f = 0; f < 10; ++f) {
    FrameDetections fd;
    fd.frame = f;
    const Vec3 p(0.05 * f, 0, 4);
    if (f < 4 || f > 6) fd.detections.push_back(det(p, 1, f ? Vec3(0.05, 0, 0) : Vec3::Zero()));
    frames.push_back(fd);
  }
  const TrackOutput out = track_sequence(frames, std::vector<Subject>{{3, Vec3(0, 0, 4)}}, cfg);
  REQUIRE(out.size() == 10);
  for (int f = 0; f < 10; ++f) {
    REQUIRE(out[static_cast<std::size_t>(f)].tracks.size() == 1);
    const TrackEntry& e = out[static_cast<std::size_t>(f)].tracks[0];
    CHECK(e.id == 3);
    CHECK((e.position - Vec3(0.05 * f, 0, 4)).norm() < 1e-12);
    CHECK(e.interpolated == (f >= 4 && f <= 6));
  }

  cfg.mode = TrackingMode::kOnline;
  const TrackOutput online = track_sequence(frames, std::vector<Subject>{{3, Vec3(0, 0, 4)}}, cfg);
  // Online output holds the stale position.
  CHECK((online[5].tracks[0].position - Vec3(0.15, 0, 4)).norm() < 1e-12);
  CHECK_FALSE(online[5].tracks[0].matched);
}
