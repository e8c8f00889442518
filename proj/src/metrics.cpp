#include "trajkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "trajkit/assignment.hpp"
#include "trajkit/errors.hpp"

namespace trajkit {

void validate(const EvalSequence& seq) {
  for (const EvalFrame& f : seq) {
    for (const auto* side : {&f.gt, &f.pred}) {
      std::set<int> ids;
      for (const EvalObject& o : *side) {
        if (!ids.insert(o.id).second) {
          fail(ErrorKind::kInvalidArgument,
               "duplicate id " + std::to_string(o.id) + " in frame " + std::to_string(f.frame));
        }
      }
    }
  }
}

std::vector<FrameAssignment> match_frames(const EvalSequence& seq, double dist_thresh) {
  if (!(dist_thresh > 0.0)) fail(ErrorKind::kInvalidArgument, "match_frames: threshold must be positive");
  std::vector<FrameAssignment> out;
  out.reserve(seq.size());
  for (const EvalFrame& f : seq) {
    const auto ng = static_cast<Eigen::Index>(f.gt.size());
    const auto np = static_cast<Eigen::Index>(f.pred.size());
    Eigen::MatrixXd cost(ng, np);
    for (Eigen::Index g = 0; g < ng; ++g) {
      for (Eigen::Index p = 0; p < np; ++p) {
        cost(g, p) = (f.gt[static_cast<std::size_t>(g)].position - f.pred[static_cast<std::size_t>(p)].position).norm();
      }
    }
    const Assignment a = solve_assignment(cost);
    FrameAssignment fa;
    std::vector<char> pred_used(static_cast<std::size_t>(np), 0);
    for (Eigen::Index g = 0; g < ng; ++g) {
      const int p = a.row_to_col[static_cast<std::size_t>(g)];
      if (p >= 0 && cost(g, p) <= dist_thresh) {
        fa.pairs.emplace_back(static_cast<int>(g), p);
        pred_used[static_cast<std::size_t>(p)] = 1;
      } else {
        fa.unmatched_gt.push_back(static_cast<int>(g));
      }
    }
    for (Eigen::Index p = 0; p < np; ++p) {
      if (!pred_used[static_cast<std::size_t>(p)]) fa.unmatched_pred.push_back(static_cast<int>(p));
    }
    out.push_back(std::move(fa));
  }
  return out;
}

double ate(const Points3& pred, const Points3& gt) {
  if (pred.rows() != gt.rows()) fail(ErrorKind::kInvalidArgument, "ate: trajectory lengths differ");
  if (pred.rows() < 3) fail(ErrorKind::kInsufficientData, "ate: need at least 3 poses");
  const SimilarityTransform T = umeyama_align(pred, gt);
  const Points3 residual = T.apply(pred) - gt;
  return std::sqrt(residual.rowwise().squaredNorm().mean());
}

namespace {

Points3 to_points(std::span<const Vec3> v) {
  Points3 p(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return p;
}

void check_assignment(const EvalSequence& seq, std::span<const FrameAssignment> assignment) {
  if (assignment.size() != seq.size()) {
    fail(ErrorKind::kInvalidArgument, "assignment does not cover the sequence");
  }
}

int total_gt(const EvalSequence& seq) {
  int n = 0;
  for (const EvalFrame& f : seq) n += static_cast<int>(f.gt.size());
  return n;
}

}  // namespace

double ate(std::span<const Vec3> pred, std::span<const Vec3> gt) { return ate(to_points(pred), to_points(gt)); }

ClearMot clear_mot(const EvalSequence& seq, std::span<const FrameAssignment> assignment) {
  check_assignment(seq, assignment);
  ClearMot r;
  r.gt_count = total_gt(seq);
  if (r.gt_count == 0) fail(ErrorKind::kUndefinedMetric, "MOTA is undefined without ground truth");
  std::map<int, int> last_pred;
  for (std::size_t f = 0; f < seq.size(); ++f) {
    const FrameAssignment& a = assignment[f];
    r.misses += static_cast<int>(a.unmatched_gt.size());
    r.false_positives += static_cast<int>(a.unmatched_pred.size());
    r.matches += static_cast<int>(a.pairs.size());
    for (const auto& [g, p] : a.pairs) {
      const int gid = seq[f].gt[static_cast<std::size_t>(g)].id;
      const int pid = seq[f].pred[static_cast<std::size_t>(p)].id;
      const auto it = last_pred.find(gid);
      if (it != last_pred.end() && it->second != pid) ++r.id_switches;
      last_pred[gid] = pid;
    }
  }
  r.mota = 1.0 - static_cast<double>(r.misses + r.false_positives + r.id_switches) / r.gt_count;
  return r;
}

ClearMot aggregate(std::span<const ClearMot> parts) {
  ClearMot r;
  for (const ClearMot& c : parts) {
    r.id_switches += c.id_switches;
    r.misses += c.misses;
    r.false_positives += c.false_positives;
    r.matches += c.matches;
    r.gt_count += c.gt_count;
  }
  if (r.gt_count == 0) fail(ErrorKind::kUndefinedMetric, "MOTA is undefined without ground truth");
  r.mota = 1.0 - static_cast<double>(r.misses + r.false_positives + r.id_switches) / r.gt_count;
  return r;
}

Idf1 idf1(const EvalSequence& seq, std::span<const FrameAssignment> assignment) {
  check_assignment(seq, assignment);
  const int n_gt = total_gt(seq);
  if (n_gt == 0) fail(ErrorKind::kUndefinedMetric, "IDF1 is undefined without ground truth");
  int n_pred = 0;
  std::map<int, int> gt_index, pred_index;
  for (const EvalFrame& f : seq) {
    n_pred += static_cast<int>(f.pred.size());
    for (const auto& o : f.gt) gt_index.try_emplace(o.id, static_cast<int>(gt_index.size()));
    for (const auto& o : f.pred) pred_index.try_emplace(o.id, static_cast<int>(pred_index.size()));
  }
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gt_index.size()),
                                                  static_cast<Eigen::Index>(pred_index.size()));
  for (std::size_t f = 0; f < seq.size(); ++f) {
    for (const auto& [g, p] : assignment[f].pairs) {
      overlap(gt_index.at(seq[f].gt[static_cast<std::size_t>(g)].id),
              pred_index.at(seq[f].pred[static_cast<std::size_t>(p)].id)) += 1.0;
    }
  }
  Idf1 r;
  if (overlap.size() > 0) {
    const Assignment a = solve_assignment(-overlap);
    std::vector<int> gt_ids(gt_index.size()), pred_ids(pred_index.size());
    for (const auto& [id, k] : gt_index) gt_ids[static_cast<std::size_t>(k)] = id;
    for (const auto& [id, k] : pred_index) pred_ids[static_cast<std::size_t>(k)] = id;
    for (std::size_t g = 0; g < a.row_to_col.size(); ++g) {
      const int p = a.row_to_col[g];
      if (p < 0 || overlap(static_cast<Eigen::Index>(g), p) <= 0.0) continue;
      r.idtp += static_cast<int>(overlap(static_cast<Eigen::Index>(g), p));
      r.gt_to_pred[gt_ids[g]] = pred_ids[static_cast<std::size_t>(p)];
    }
  }
  r.idfn = n_gt - r.idtp;
  r.idfp = n_pred - r.idtp;
  r.idf1 = 2.0 * r.idtp / static_cast<double>(2 * r.idtp + r.idfp + r.idfn);
  return r;
}

double hota_alpha(int i) { return 0.05 * (i + 1); }

Hota hota(const EvalSequence& seq, const HotaConfig& cfg) {
  if (!(cfg.dist_max > 0.0)) fail(ErrorKind::kInvalidArgument, "hota: dist_max must be positive");
  if (total_gt(seq) == 0) fail(ErrorKind::kUndefinedMetric, "HOTA is undefined without ground truth");
  constexpr double kEps = std::numeric_limits<double>::epsilon();

  std::map<int, int> gt_index, pred_index;
  for (const EvalFrame& f : seq) {
    for (const auto& o : f.gt) gt_index.try_emplace(o.id, static_cast<int>(gt_index.size()));
    for (const auto& o : f.pred) pred_index.try_emplace(o.id, static_cast<int>(pred_index.size()));
  }
  const auto NG = static_cast<Eigen::Index>(gt_index.size());
  const auto NP = static_cast<Eigen::Index>(pred_index.size());

  auto similarity = [&](const EvalFrame& f) {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(f.gt.size()), static_cast<Eigen::Index>(f.pred.size()));
    for (Eigen::Index g = 0; g < s.rows(); ++g) {
      for (Eigen::Index p = 0; p < s.cols(); ++p) {
        const double d = (f.gt[static_cast<std::size_t>(g)].position - f.pred[static_cast<std::size_t>(p)].position).norm();
        s(g, p) = std::max(0.0, 1.0 - d / cfg.dist_max);
      }
    }
    return s;
  };

  // Global alignment between identities, independent of alpha.
  Eigen::MatrixXd potential = Eigen::MatrixXd::Zero(NG, NP);
  Eigen::VectorXd gt_count = Eigen::VectorXd::Zero(NG);
  Eigen::VectorXd pred_count = Eigen::VectorXd::Zero(NP);
  for (const EvalFrame& f : seq) {
    const Eigen::MatrixXd s = similarity(f);
    const Eigen::VectorXd row_sum = s.rowwise().sum();
    const Eigen::RowVectorXd col_sum = s.colwise().sum();
    for (Eigen::Index g = 0; g < s.rows(); ++g) {
      const int gi = gt_index.at(f.gt[static_cast<std::size_t>(g)].id);
      for (Eigen::Index p = 0; p < s.cols(); ++p) {
        const double denom = row_sum(g) + col_sum(p) - s(g, p);
        if (denom > kEps) potential(gi, pred_index.at(f.pred[static_cast<std::size_t>(p)].id)) += s(g, p) / denom;
      }
    }
    for (const auto& o : f.gt) gt_count(gt_index.at(o.id)) += 1.0;
    for (const auto& o : f.pred) pred_count(pred_index.at(o.id)) += 1.0;
  }
  Eigen::MatrixXd global_alignment = Eigen::MatrixXd::Zero(NG, NP);
  for (Eigen::Index g = 0; g < NG; ++g) {
    for (Eigen::Index p = 0; p < NP; ++p) {
      global_alignment(g, p) = potential(g, p) / (gt_count(g) + pred_count(p) - potential(g, p));
    }
  }

  std::array<double, kHotaAlphaCount> tp{}, fn{}, fp{};
  std::vector<Eigen::MatrixXd> match_counts(kHotaAlphaCount, Eigen::MatrixXd::Zero(NG, NP));
  for (const EvalFrame& f : seq) {
    const Eigen::MatrixXd s = similarity(f);
    const auto ng = static_cast<double>(f.gt.size());
    const auto np = static_cast<double>(f.pred.size());
    if (s.size() == 0) {
      for (int a = 0; a < kHotaAlphaCount; ++a) {
        fn[static_cast<std::size_t>(a)] += ng;
        fp[static_cast<std::size_t>(a)] += np;
      }
      continue;
    }
    Eigen::MatrixXd score(s.rows(), s.cols());
    for (Eigen::Index g = 0; g < s.rows(); ++g) {
      const int gi = gt_index.at(f.gt[static_cast<std::size_t>(g)].id);
      for (Eigen::Index p = 0; p < s.cols(); ++p) {
        score(g, p) = global_alignment(gi, pred_index.at(f.pred[static_cast<std::size_t>(p)].id)) * s(g, p);
      }
    }
    const Assignment match = solve_assignment(-score);
    for (int a = 0; a < kHotaAlphaCount; ++a) {
      const double alpha = hota_alpha(a);
      double n = 0.0;
      for (Eigen::Index g = 0; g < s.rows(); ++g) {
        const int p = match.row_to_col[static_cast<std::size_t>(g)];
        if (p < 0 || s(g, p) < alpha - kEps) continue;
        n += 1.0;
        match_counts[static_cast<std::size_t>(a)](gt_index.at(f.gt[static_cast<std::size_t>(g)].id),
                                                  pred_index.at(f.pred[static_cast<std::size_t>(p)].id)) += 1.0;
      }
      tp[static_cast<std::size_t>(a)] += n;
      fn[static_cast<std::size_t>(a)] += ng - n;
      fp[static_cast<std::size_t>(a)] += np - n;
    }
  }

  Hota r;
  for (int a = 0; a < kHotaAlphaCount; ++a) {
    const auto ai = static_cast<std::size_t>(a);
    const Eigen::MatrixXd& mc = match_counts[ai];
    double ass = 0.0;
    for (Eigen::Index g = 0; g < NG; ++g) {
      for (Eigen::Index p = 0; p < NP; ++p) {
        if (mc(g, p) <= 0.0) continue;
        ass += mc(g, p) * mc(g, p) / std::max(1.0, gt_count(g) + pred_count(p) - mc(g, p));
      }
    }
    r.assa_alpha[ai] = ass / std::max(1.0, tp[ai]);
    r.deta_alpha[ai] = tp[ai] / std::max(1.0, tp[ai] + fn[ai] + fp[ai]);
    r.hota_alpha[ai] = std::sqrt(r.deta_alpha[ai] * r.assa_alpha[ai]);
    r.hota += r.hota_alpha[ai];
    r.deta += r.deta_alpha[ai];
    r.assa += r.assa_alpha[ai];
  }
  r.hota /= kHotaAlphaCount;
  r.deta /= kHotaAlphaCount;
  r.assa /= kHotaAlphaCount;
  return r;
}

double mpjpe(const Points3& pred, const Points3& gt, PoseAlignment mode) {
  if (pred.rows() != gt.rows() || pred.rows() == 0) {
    fail(ErrorKind::kInvalidArgument, "mpjpe: joint sets differ in shape");
  }
  const Points3 p = mode == PoseAlignment::kProcrustes ? procrustes_align(pred, gt).aligned : pred;
  return 1000.0 * (p - gt).rowwise().norm().mean();
}

std::vector<double> mpjpe_batch(std::span<const Points3> pred, std::span<const Points3> gt, PoseAlignment mode) {
  if (pred.size() != gt.size()) fail(ErrorKind::kInvalidArgument, "mpjpe_batch: person counts differ");
  std::vector<double> out;
  for (std::size_t i = 0; i < pred.size(); ++i) out.push_back(mpjpe(pred[i], gt[i], mode));
  return out;
}

double pve(const Points3& pred, const Points3& gt) {
  if (pred.rows() != gt.rows() || pred.rows() == 0) fail(ErrorKind::kInvalidArgument, "pve: mesh shapes differ");
  return 1000.0 * (pred - gt).rowwise().norm().mean();
}

KeypointRegressor::KeypointRegressor(Eigen::SparseMatrix<double, Eigen::RowMajor> weights)
    : weights_(std::move(weights)) {
  for (Eigen::Index r = 0; r < weights_.outerSize(); ++r) {
    double sum = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(weights_, r); it; ++it) sum += it.value();
    if (std::abs(sum - 1.0) > 1e-9) {
      fail(ErrorKind::kInvalidArgument, "keypoint regressor row " + std::to_string(r) + " does not sum to 1");
    }
  }
}

Points3 regress_joints(const KeypointRegressor& R, const Points3& vertices) {
  if (vertices.rows() != R.vertices()) fail(ErrorKind::kInvalidArgument, "regress_joints: vertex count mismatch");
  return R.weights() * vertices;
}

std::map<int, double> per_subject_ate(const EvalSequence& seq, const std::map<int, int>& gt_to_pred) {
  std::map<int, std::pair<std::vector<Vec3>, std::vector<Vec3>>> tracks;
  for (const EvalFrame& f : seq) {
    for (const EvalObject& g : f.gt) {
      const auto m = gt_to_pred.find(g.id);
      if (m == gt_to_pred.end()) continue;
      for (const EvalObject& p : f.pred) {
        if (p.id != m->second) continue;
        tracks[g.id].first.push_back(p.position);
        tracks[g.id].second.push_back(g.position);
      }
    }
  }
  std::map<int, double> out;
  for (const auto& [id, pg] : tracks) {
    if (pg.first.size() < 3) continue;
    try {
      out[id] = ate(std::span<const Vec3>(pg.first), std::span<const Vec3>(pg.second));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInsufficientData) throw;
    }
  }
  return out;
}

}  // namespace trajkit
