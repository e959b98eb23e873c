#include "bt/rgbd_frame.hpp"

#include "bt/error.hpp"

#include <cmath>

namespace bt {

namespace {

PointMap unproject_depth(const DepthMap& depth, const Intrinsics& K) {
  PointMap cloud(depth.width, depth.height, Eigen::Vector3d::Zero());
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (auto p = unproject<double>(u, v, depth(u, v), K)) cloud(u, v) = *p;
    }
  }
  return cloud;
}

}  // namespace

PointMap estimate_normals(const DepthMap& depth, const Intrinsics& K, const NormalParams& params) {
  const int r = params.radius;
  const PointMap cloud = unproject_depth(depth, K);
  PointMap normals(depth.width, depth.height, Eigen::Vector3d::Zero());
  for (int v = r; v < depth.height - r; ++v) {
    for (int u = r; u < depth.width - r; ++u) {
      const double d = depth(u, v);
      if (!(d > 0.0)) continue;
      const double dl = depth(u - r, v), dr = depth(u + r, v);
      const double du = depth(u, v - r), dd = depth(u, v + r);
      if (!(dl > 0 && dr > 0 && du > 0 && dd > 0)) continue;
      if (std::abs(dl - d) > params.depth_jump || std::abs(dr - d) > params.depth_jump ||
          std::abs(du - d) > params.depth_jump || std::abs(dd - d) > params.depth_jump)
        continue;
      const Eigen::Vector3d tu = cloud(u + r, v) - cloud(u - r, v);
      const Eigen::Vector3d tv = cloud(u, v + r) - cloud(u, v - r);
      Eigen::Vector3d n = tu.cross(tv);
      const double len = n.norm();
      if (len < 1e-12) continue;
      n /= len;
      if (n.dot(cloud(u, v)) > 0) n = -n;
      normals(u, v) = n;
    }
  }
  return normals;
}

Frame ingest(int id, ColorImage color, DepthMap depth, Mask mask, const Intrinsics& K,
             const NormalParams& params) {
  if (depth.width != K.width || depth.height != K.height)
    throw DataError("depth map size does not match intrinsics");
  if (!mask.same_shape(depth)) throw DataError("mask size does not match depth map");
  if (!color.empty() && !color.same_shape(depth)) throw DataError("color image size does not match depth map");

  Frame f;
  f.id = id;
  f.intrinsics = K;
  f.cloud = unproject_depth(depth, K);
  f.normals = estimate_normals(depth, K, params);
  for (std::size_t i = 0; i < f.cloud.size(); ++i) {
    if (mask.data[i] == 0) {
      f.cloud.data[i].setZero();
      f.normals.data[i].setZero();
    }
  }
  f.color = std::move(color);
  f.depth = std::move(depth);
  f.mask = std::move(mask);
  return f;
}

std::vector<SurfacePoint> masked_points(const Frame& frame, int stride) {
  std::vector<SurfacePoint> out;
  if (stride < 1) stride = 1;
  for (int v = 0; v < frame.cloud.height; v += stride) {
    for (int u = 0; u < frame.cloud.width; u += stride) {
      if (frame.has_point(u, v) && frame.has_normal(u, v))
        out.push_back({{u, v}, frame.cloud(u, v), frame.normals(u, v)});
    }
  }
  return out;
}

std::optional<SurfacePoint> lookup(const Frame& frame, double u, double v) {
  const int iu = static_cast<int>(std::lround(u));
  const int iv = static_cast<int>(std::lround(v));
  if (!frame.cloud.contains(iu, iv) || !frame.has_point(iu, iv) || !frame.has_normal(iu, iv))
    return std::nullopt;
  return SurfacePoint{{iu, iv}, frame.cloud(iu, iv), frame.normals(iu, iv)};
}

}  // namespace bt
