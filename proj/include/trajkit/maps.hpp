#pragma once

// Dense detection maps: construction, composition, peak extraction and
// per-cell sampling.
//
// Grid cell (d, h, w) corresponds to image pixel (u, v) = (w * width / W,
// h * height / H) and to the depth of anchor bin d. A camera-space point is
// assigned to the nearest cell on each axis.

#include <compare>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "trajkit/geometry.hpp"

namespace trajkit {

struct MapDims {
  int D = 64;
  int H = 128;
  int W = 128;
  int C = 128;

  std::size_t cells3d() const {
    return static_cast<std::size_t>(D) * static_cast<std::size_t>(H) * static_cast<std::size_t>(W);
  }
  std::size_t cells2d() const { return static_cast<std::size_t>(H) * static_cast<std::size_t>(W); }
};

void validate(const MapDims& dims);

struct GridIndex {
  int d = 0;
  int h = 0;
  int w = 0;

  auto operator<=>(const GridIndex&) const = default;
};

// Depth bins uniform in u = 1/(1+z) between u(0) = 1 and u(z_max).
struct DepthAnchor {
  double z_max = 60.0;
  int bins = 64;

  double depth(int d) const;
  // Fractional bin index; inverse of depth() on [0, z_max].
  double bin_position(double z) const;
  int nearest_bin(double z) const;
};

struct CenterMap3D {
  int D = 0, H = 0, W = 0;
  std::vector<double> values;

  CenterMap3D() = default;
  CenterMap3D(int d, int h, int w) : D(d), H(h), W(w), values(static_cast<std::size_t>(d) * h * w, 0.0) {}
  explicit CenterMap3D(const MapDims& dims) : CenterMap3D(dims.D, dims.H, dims.W) {}

  std::size_t offset(const GridIndex& i) const {
    return (static_cast<std::size_t>(i.d) * H + static_cast<std::size_t>(i.h)) * W +
           static_cast<std::size_t>(i.w);
  }
  GridIndex index_of(std::size_t off) const {
    const int w = static_cast<int>(off % static_cast<std::size_t>(W));
    const std::size_t rest = off / static_cast<std::size_t>(W);
    return {static_cast<int>(rest / static_cast<std::size_t>(H)),
            static_cast<int>(rest % static_cast<std::size_t>(H)), w};
  }
  bool contains(const GridIndex& i) const {
    return i.d >= 0 && i.d < D && i.h >= 0 && i.h < H && i.w >= 0 && i.w < W;
  }
  double& at(const GridIndex& i) { return values[offset(i)]; }
  double at(const GridIndex& i) const { return values[offset(i)]; }
};

// V x D x H x W, channel-first. Used for the localization (V=3) and motion
// offset (V=3) maps.
struct VectorMap3D {
  int V = 0, D = 0, H = 0, W = 0;
  std::vector<double> values;

  VectorMap3D() = default;
  VectorMap3D(int v, int d, int h, int w)
      : V(v), D(d), H(h), W(w), values(static_cast<std::size_t>(v) * d * h * w, 0.0) {}

  std::size_t plane() const { return static_cast<std::size_t>(D) * H * W; }
  std::size_t offset(int channel, const GridIndex& i) const {
    return static_cast<std::size_t>(channel) * plane() +
           (static_cast<std::size_t>(i.d) * H + static_cast<std::size_t>(i.h)) * W +
           static_cast<std::size_t>(i.w);
  }
  bool contains(const GridIndex& i) const {
    return i.d >= 0 && i.d < D && i.h >= 0 && i.h < H && i.w >= 0 && i.w < W;
  }
  void set(const GridIndex& i, const Eigen::VectorXd& v);
};

// V x H x W, channel-first. The world motion map uses V=6 with channel layout
// [orientation (axis-angle, 3), world translation offset (3)]; mesh feature
// maps use V=C.
struct VectorMap2D {
  int V = 0, H = 0, W = 0;
  std::vector<double> values;

  VectorMap2D() = default;
  VectorMap2D(int v, int h, int w) : V(v), H(h), W(w), values(static_cast<std::size_t>(v) * h * w, 0.0) {}

  std::size_t offset(int channel, int h, int w) const {
    return (static_cast<std::size_t>(channel) * H + static_cast<std::size_t>(h)) * W +
           static_cast<std::size_t>(w);
  }
  bool contains(int h, int w) const { return h >= 0 && h < H && w >= 0 && w < W; }
  void set(int h, int w, const Eigen::VectorXd& v);
};

inline constexpr int kWorldMotionChannels = 6;
inline VectorMap2D make_world_motion_map(int H, int W) { return {kWorldMotionChannels, H, W}; }

struct Detection {
  GridIndex grid_index;
  double confidence = 0.0;
  Vec3 position = Vec3::Zero();       // refined camera-space position, meters
  Vec3 motion_offset = Vec3::Zero();  // camera-space displacement since previous frame
};

struct WorldSample {
  Vec3 orientation = Vec3::Zero();         // axis-angle, world frame
  Vec3 translation_offset = Vec3::Zero();  // world displacement since previous frame
};

// Pixel coordinates of a grid cell's sample point.
Vec2 grid_to_pixel(int h, int w, const MapDims& dims, const CameraIntrinsics& K);

// Nearest cell for a camera-space point, or nullopt when it falls outside the
// grid (behind the camera, beyond z_max or outside the image).
std::optional<GridIndex> camera_to_grid(const Vec3& X, const MapDims& dims, const DepthAnchor& anchor,
                                        const CameraIntrinsics& K);

Vec3 grid_to_camera(const GridIndex& index, const MapDims& dims, const DepthAnchor& anchor,
                    const CameraIntrinsics& K);

struct CenterRender {
  CenterMap3D map;
  int skipped = 0;                               // centers outside the frustum
  std::vector<std::optional<GridIndex>> cells;   // per input center
};

// Isotropic Gaussian bump per center, peak 1.0 at the nearest cell, combined
// by max. When `owner` is given it receives, per cell, the index of the center
// whose bump wins there (or -1).
CenterRender render_center_map(std::span<const Vec3> centers, const MapDims& dims,
                               const DepthAnchor& anchor, const CameraIntrinsics& K,
                               double sigma = 2.0, std::vector<int>* owner = nullptr);

// Radius (in cells) of the rendered Gaussian footprint.
int gaussian_radius(double sigma);

enum class Composition { kProduct, kMean };

// Builds a D x H x W map from a front view (H x W) and a bird's-eye view
// (D x W). kProduct: front[h,w] * bev[d,w]; kMean: (front + bev) / 2.
CenterMap3D compose_center_3d(const Eigen::MatrixXd& front, const Eigen::MatrixXd& bev,
                              Composition mode = Composition::kProduct);

struct Peak {
  GridIndex index;
  double confidence = 0.0;
};

inline constexpr double kDefaultCenterThreshold = 0.12;

// Strict local maxima over a k x k x k neighborhood that reach conf_thresh.
// Equal neighbors are resolved toward the lower linear index. Sorted by
// confidence, descending; ties by linear index.
std::vector<Peak> extract_peaks(const CenterMap3D& map, double conf_thresh = kDefaultCenterThreshold,
                                int nms_kernel = 3);

Eigen::VectorXd sample_vector_map(const VectorMap3D& map, const GridIndex& index);
Eigen::VectorXd sample_vector_map(const VectorMap2D& map, int h, int w);
WorldSample sample_world_motion(const VectorMap2D& world, int h, int w);

// Cell of the mesh feature map (or world motion map) under a tracked
// camera-space position.
std::optional<std::pair<int, int>> feature_cell(const Vec3& position, const MapDims& dims,
                                                const CameraIntrinsics& K);

Vec3 refine_position(const Vec3& coarse, const Vec3& delta);

struct DecodeConfig {
  double conf_thresh = kDefaultCenterThreshold;
  int nms_kernel = 3;
  Composition composition = Composition::kProduct;
};

struct FrameDecode {
  std::vector<Detection> detections;
  std::vector<WorldSample> world;  // parallel to detections
};

struct FrameMaps {
  CenterMap3D center;
  VectorMap3D localization;
  VectorMap3D motion;
  VectorMap2D world;
};

FrameDecode decode_frame(const CenterMap3D& center, const VectorMap3D& localization,
                         const VectorMap3D& motion, const VectorMap2D& world, const MapDims& dims,
                         const DepthAnchor& anchor, const CameraIntrinsics& K,
                         const DecodeConfig& cfg = {});

FrameDecode decode_frame(const FrameMaps& maps, const MapDims& dims, const DepthAnchor& anchor,
                         const CameraIntrinsics& K, const DecodeConfig& cfg = {});

// Front/bird's-eye inputs are composed first.
FrameDecode decode_frame(const Eigen::MatrixXd& front, const Eigen::MatrixXd& bev,
                         const VectorMap3D& localization, const VectorMap3D& motion,
                         const VectorMap2D& world, const MapDims& dims, const DepthAnchor& anchor,
                         const CameraIntrinsics& K, const DecodeConfig& cfg = {});

}  // namespace trajkit
