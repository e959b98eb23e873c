#pragma once

#include "bt/image.hpp"
#include "bt/keypoint.hpp"
#include "bt/se3.hpp"

#include <vector>

namespace bt {

struct NormalParams {
  /// Pixel offset of the central differences.
  int radius = 2;
  /// Neighbors whose depth differs from the center by more than this
  /// invalidate the normal (meters).
  double depth_jump = 0.05;
};

struct SurfacePoint {
  Eigen::Vector2i pixel;
  Eigen::Vector3d point;
  Eigen::Vector3d normal;

  bool operator==(const SurfacePoint&) const = default;
};

/// One RGB-D observation. Only `pose` changes after construction.
struct Frame {
  int id = 0;
  ColorImage color;
  DepthMap depth;
  Mask mask;
  Intrinsics intrinsics;
  PointMap cloud;    // valid where depth > 0 and mask set
  PointMap normals;  // valid where cloud is valid and the local surface is defined
  std::vector<Keypoint> keypoints;
  /// masked_points() at the dense-edge stride, filled by the tracker.
  std::vector<SurfacePoint> samples;
  Pose3d pose;

  bool has_point(int u, int v) const { return cloud(u, v).z() > 0.0; }
  bool has_normal(int u, int v) const { return normals(u, v).squaredNorm() > 0.0; }
};

/// Builds the masked cloud and its normals. Throws DataError on any
/// dimension mismatch between images and intrinsics.
Frame ingest(int id, ColorImage color, DepthMap depth, Mask mask, const Intrinsics& K,
             const NormalParams& params = {});

/// Normals over the whole depth map, ignoring any mask.
PointMap estimate_normals(const DepthMap& depth, const Intrinsics& K, const NormalParams& params = {});

/// Valid masked pixels carrying both a point and a normal, sampled every
/// `stride` pixels in each axis, row-major.
std::vector<SurfacePoint> masked_points(const Frame& frame, int stride);

/// Point of frame at the nearest pixel to (u, v), or empty.
std::optional<SurfacePoint> lookup(const Frame& frame, double u, double v);

}  // namespace bt
