#include "trajkit/maps.hpp"

#include <algorithm>
#include <cmath>

#include "trajkit/errors.hpp"

namespace trajkit {

void validate(const MapDims& dims) {
  if (dims.D < 1 || dims.H < 1 || dims.W < 1 || dims.C < 1) {
    fail(ErrorKind::kInvalidArgument, "map dimensions must be positive");
  }
}

namespace {

void check_anchor(const MapDims& dims, const DepthAnchor& anchor) {
  if (anchor.bins != dims.D) fail(ErrorKind::kInvalidArgument, "depth anchor bins must equal D");
}

double anchor_u_far(const DepthAnchor& a) { return 1.0 / (1.0 + a.z_max); }

}  // namespace

double DepthAnchor::depth(int d) const {
  if (bins < 2 || !(z_max > 0.0)) fail(ErrorKind::kInvalidArgument, "invalid depth anchor");
  if (d == 0) return 0.0;
  if (d == bins - 1) return z_max;
  const double u = 1.0 - (static_cast<double>(d) / (bins - 1)) * (1.0 - anchor_u_far(*this));
  return 1.0 / u - 1.0;
}

double DepthAnchor::bin_position(double z) const {
  if (bins < 2 || !(z_max > 0.0)) fail(ErrorKind::kInvalidArgument, "invalid depth anchor");
  return (1.0 - 1.0 / (1.0 + z)) / (1.0 - anchor_u_far(*this)) * (bins - 1);
}

int DepthAnchor::nearest_bin(double z) const {
  return static_cast<int>(std::lround(bin_position(z)));
}

void VectorMap3D::set(const GridIndex& i, const Eigen::VectorXd& v) {
  if (!contains(i) || v.size() != V) fail(ErrorKind::kInvalidArgument, "VectorMap3D::set out of range");
  for (int c = 0; c < V; ++c) values[offset(c, i)] = v(c);
}

void VectorMap2D::set(int h, int w, const Eigen::VectorXd& v) {
  if (!contains(h, w) || v.size() != V) fail(ErrorKind::kInvalidArgument, "VectorMap2D::set out of range");
  for (int c = 0; c < V; ++c) values[offset(c, h, w)] = v(c);
}

Vec2 grid_to_pixel(int h, int w, const MapDims& dims, const CameraIntrinsics& K) {
  return {static_cast<double>(w) * K.width / dims.W, static_cast<double>(h) * K.height / dims.H};
}

std::optional<GridIndex> camera_to_grid(const Vec3& X, const MapDims& dims, const DepthAnchor& anchor,
                                        const CameraIntrinsics& K) {
  check_anchor(dims, anchor);
  if (!(X.z() > 0.0) || !X.allFinite() || X.z() > anchor.z_max) return std::nullopt;
  const double bin = anchor.bin_position(X.z());
  const double u = K.cx + K.focal * X.x() / X.z();
  const double v = K.cy + K.focal * X.y() / X.z();
  const double gw = u * dims.W / K.width;
  const double gh = v * dims.H / K.height;
  if (!(std::abs(gw) < 1e9) || !(std::abs(gh) < 1e9)) return std::nullopt;
  GridIndex idx{static_cast<int>(std::lround(bin)), static_cast<int>(std::lround(gh)),
                static_cast<int>(std::lround(gw))};
  if (idx.d < 0 || idx.d >= dims.D || idx.h < 0 || idx.h >= dims.H || idx.w < 0 || idx.w >= dims.W) {
    return std::nullopt;
  }
  return idx;
}

Vec3 grid_to_camera(const GridIndex& index, const MapDims& dims, const DepthAnchor& anchor,
                    const CameraIntrinsics& K) {
  check_anchor(dims, anchor);
  const double z = anchor.depth(index.d);
  return back_project(K, grid_to_pixel(index.h, index.w, dims, K), z);
}

int gaussian_radius(double sigma) { return std::max(1, static_cast<int>(std::ceil(3.0 * sigma))); }

CenterRender render_center_map(std::span<const Vec3> centers, const MapDims& dims,
                               const DepthAnchor& anchor, const CameraIntrinsics& K, double sigma,
                               std::vector<int>* owner) {
  validate(dims);
  if (!(sigma > 0.0)) fail(ErrorKind::kInvalidArgument, "sigma must be positive");
  CenterRender out;
  out.map = CenterMap3D(dims);
  if (owner) owner->assign(dims.cells3d(), -1);
  const int r = gaussian_radius(sigma);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

  for (std::size_t k = 0; k < centers.size(); ++k) {
    const auto cell = camera_to_grid(centers[k], dims, anchor, K);
    out.cells.push_back(cell);
    if (!cell) {
      ++out.skipped;
      continue;
    }
    for (int d = std::max(0, cell->d - r); d <= std::min(dims.D - 1, cell->d + r); ++d) {
      for (int h = std::max(0, cell->h - r); h <= std::min(dims.H - 1, cell->h + r); ++h) {
        for (int w = std::max(0, cell->w - r); w <= std::min(dims.W - 1, cell->w + r); ++w) {
          const int dd = d - cell->d, dh = h - cell->h, dw = w - cell->w;
          const double value = std::exp(-(dd * dd + dh * dh + dw * dw) * inv2s2);
          const std::size_t off = out.map.offset({d, h, w});
          if (value > out.map.values[off]) {
            out.map.values[off] = value;
            if (owner) (*owner)[off] = static_cast<int>(k);
          }
        }
      }
    }
  }
  return out;
}

CenterMap3D compose_center_3d(const Eigen::MatrixXd& front, const Eigen::MatrixXd& bev,
                              Composition mode) {
  if (front.cols() != bev.cols() || front.size() == 0 || bev.size() == 0) {
    fail(ErrorKind::kInvalidArgument, "compose_center_3d: front (H x W) and bev (D x W) widths differ");
  }
  const int H = static_cast<int>(front.rows());
  const int W = static_cast<int>(front.cols());
  const int D = static_cast<int>(bev.rows());
  CenterMap3D out(D, H, W);
  for (int d = 0; d < D; ++d) {
    for (int h = 0; h < H; ++h) {
      for (int w = 0; w < W; ++w) {
        const double f = front(h, w);
        const double b = bev(d, w);
        out.at({d, h, w}) = mode == Composition::kProduct ? f * b : 0.5 * (f + b);
      }
    }
  }
  return out;
}

std::vector<Peak> extract_peaks(const CenterMap3D& map, double conf_thresh, int nms_kernel) {
  if (nms_kernel < 1 || nms_kernel % 2 == 0) {
    fail(ErrorKind::kInvalidArgument, "nms_kernel must be a positive odd integer");
  }
  const int r = nms_kernel / 2;
  std::vector<Peak> peaks;
  for (std::size_t off = 0; off < map.values.size(); ++off) {
    const double v = map.values[off];
    if (!(v >= conf_thresh) || v <= 0.0) continue;
    const GridIndex c = map.index_of(off);
    bool is_peak = true;
    for (int d = std::max(0, c.d - r); is_peak && d <= std::min(map.D - 1, c.d + r); ++d) {
      for (int h = std::max(0, c.h - r); is_peak && h <= std::min(map.H - 1, c.h + r); ++h) {
        for (int w = std::max(0, c.w - r); w <= std::min(map.W - 1, c.w + r); ++w) {
          const std::size_t n = map.offset({d, h, w});
          if (n == off) continue;
          const double nv = map.values[n];
          if (nv > v || (nv == v && n < off)) {
            is_peak = false;
            break;
          }
        }
      }
    }
    if (is_peak) peaks.push_back({c, v});
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.confidence > b.confidence; });
  return peaks;
}

Eigen::VectorXd sample_vector_map(const VectorMap3D& map, const GridIndex& index) {
  if (!map.contains(index)) fail(ErrorKind::kInvalidArgument, "sample_vector_map: index out of bounds");
  Eigen::VectorXd v(map.V);
  for (int c = 0; c < map.V; ++c) v(c) = map.values[map.offset(c, index)];
  return v;
}

Eigen::VectorXd sample_vector_map(const VectorMap2D& map, int h, int w) {
  if (!map.contains(h, w)) fail(ErrorKind::kInvalidArgument, "sample_vector_map: index out of bounds");
  Eigen::VectorXd v(map.V);
  for (int c = 0; c < map.V; ++c) v(c) = map.values[map.offset(c, h, w)];
  return v;
}

WorldSample sample_world_motion(const VectorMap2D& world, int h, int w) {
  if (world.V != kWorldMotionChannels) {
    fail(ErrorKind::kInvalidArgument, "world motion map must have 6 channels");
  }
  const Eigen::VectorXd v = sample_vector_map(world, h, w);
  return {v.head<3>(), v.tail<3>()};
}

std::optional<std::pair<int, int>> feature_cell(const Vec3& position, const MapDims& dims,
                                                const CameraIntrinsics& K) {
  if (!(position.z() > 0.0)) return std::nullopt;
  const Vec2 px = project_point(K, position);
  const int h = static_cast<int>(std::lround(px.y() * dims.H / K.height));
  const int w = static_cast<int>(std::lround(px.x() * dims.W / K.width));
  if (h < 0 || h >= dims.H || w < 0 || w >= dims.W) return std::nullopt;
  return std::make_pair(h, w);
}

Vec3 refine_position(const Vec3& coarse, const Vec3& delta) {
  const Vec3 t = coarse + delta;
  if (!t.allFinite()) fail(ErrorKind::kInvalidArgument, "refine_position: non-finite input");
  if (!(t.z() > 0.0)) fail(ErrorKind::kBehindCamera, "refined position is behind the camera");
  return t;
}

FrameDecode decode_frame(const CenterMap3D& center, const VectorMap3D& localization,
                         const VectorMap3D& motion, const VectorMap2D& world, const MapDims& dims,
                         const DepthAnchor& anchor, const CameraIntrinsics& K, const DecodeConfig& cfg) {
  auto same3 = [&](int D, int H, int W) { return D == dims.D && H == dims.H && W == dims.W; };
  if (!same3(center.D, center.H, center.W) || !same3(localization.D, localization.H, localization.W) ||
      !same3(motion.D, motion.H, motion.W) || world.H != dims.H || world.W != dims.W) {
    fail(ErrorKind::kInvalidArgument, "decode_frame: map dimensions disagree");
  }
  if (localization.V != 3 || motion.V != 3) {
    fail(ErrorKind::kInvalidArgument, "decode_frame: localization and motion maps need 3 channels");
  }

  FrameDecode out;
  for (const Peak& p : extract_peaks(center, cfg.conf_thresh, cfg.nms_kernel)) {
    Detection det;
    det.grid_index = p.index;
    det.confidence = p.confidence;
    const Vec3 coarse = grid_to_camera(p.index, dims, anchor, K);
    det.position = refine_position(coarse, sample_vector_map(localization, p.index));
    det.motion_offset = sample_vector_map(motion, p.index);
    out.detections.push_back(det);
    out.world.push_back(sample_world_motion(world, p.index.h, p.index.w));
  }
  return out;
}

FrameDecode decode_frame(const FrameMaps& maps, const MapDims& dims, const DepthAnchor& anchor,
                         const CameraIntrinsics& K, const DecodeConfig& cfg) {
  return decode_frame(maps.center, maps.localization, maps.motion, maps.world, dims, anchor, K, cfg);
}

FrameDecode decode_frame(const Eigen::MatrixXd& front, const Eigen::MatrixXd& bev,
                         const VectorMap3D& localization, const VectorMap3D& motion,
                         const VectorMap2D& world, const MapDims& dims, const DepthAnchor& anchor,
                         const CameraIntrinsics& K, const DecodeConfig& cfg) {
  const CenterMap3D center = compose_center_3d(front, bev, cfg.composition);
  return decode_frame(center, localization, motion, world, dims, anchor, K, cfg);
}

}  // namespace trajkit
