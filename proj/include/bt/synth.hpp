#pragma once

#include "bt/evaluation.hpp"
#include "bt/image.hpp"
#include "bt/keypoint.hpp"
#include "bt/se3.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bt {

enum class ShapeKind { Box, Sphere, Cylinder };

/// Analytic object centered at the object-frame origin.
/// Box: full extents. Sphere: radius in x. Cylinder: radius in x, height in
/// z, axis along object z.
struct ObjectShape {
  ShapeKind kind = ShapeKind::Box;
  Eigen::Vector3d dims{0.16, 0.12, 0.20};

  /// Axis-aligned object-frame bounding box extents.
  Eigen::Vector3d bbox() const;
};

struct SyntheticScene {
  std::string name;
  ObjectShape object;
  /// Table plane under the object (object-frame z = -bbox.z / 2).
  bool table = false;
  Intrinsics camera;
  std::vector<Pose3d> trajectory;  // ground-truth object-to-camera poses
  std::vector<int> frame_ids;      // one per trajectory entry
  Pose3d initial_pose;             // pose handed to the tracker at frame 0
  double depth_sigma = 0;
  double descriptor_sigma = 0;
  double outlier_fraction = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return trajectory.size(); }
};

struct RayHit {
  double depth;                // camera z of the hit
  Eigen::Vector3d object_point;
  Eigen::Vector3d object_normal;
  bool on_object;              // false for the table
};

/// Casts the ray through subpixel (u, v) under the given object pose.
std::optional<RayHit> cast_ray(const SyntheticScene& scene, const Pose3d& pose, double u, double v);

struct RenderedFrame {
  int frame_id = 0;
  ColorImage color;
  DepthMap depth;
  Mask mask;
  Pose3d gt_pose;
};

/// Renders trajectory entry t. Throws Error when t is out of range or the
/// object is not visible.
RenderedFrame render(const SyntheticScene& scene, std::size_t t);

struct SyntheticCorrespondences {
  std::vector<Keypoint> a, b;
  MatchSet matches;
  std::size_t shortfall = 0;
};

/// n surface points visible in both trajectory entries with exact geometry,
/// random descriptors (b-side perturbed by descriptor_sigma) and
/// outlier_frac of the matches rewired to wrong partners.
SyntheticCorrespondences ground_truth_correspondences(const SyntheticScene& scene, std::size_t t1, std::size_t t2,
                                                      std::size_t n, double outlier_frac, std::uint64_t seed);

/// Uniform samples on the object surface, object frame.
ModelPoints sample_model_points(const ObjectShape& shape, std::size_t n, std::uint64_t seed);

Intrinsics default_camera();

/// Camera orbiting a static object: 2 deg per frame, 100 frames.
SyntheticScene orbit_scene(std::uint64_t seed = 7);
/// Static camera, object rotating 2 deg and translating 2 mm per frame.
SyntheticScene manipulate_scene(std::uint64_t seed = 11);
/// Orbit with 15% of the frames removed.
SyntheticScene dropped_scene(std::uint64_t seed = 13);
/// Orbit with the initial pose offset by a translation within 4 cm.
SyntheticScene perturbed_scene(std::uint64_t seed = 17);

std::vector<SyntheticScene> standard_benchmarks();
/// Throws Error for unknown names (ORBIT, MANIPULATE, DROPPED, PERTURBED).
SyntheticScene benchmark_by_name(const std::string& name, std::optional<std::uint64_t> seed = std::nullopt);

/// Object-to-camera pose of a camera at `eye` (object frame) looking at
/// `target` with `up` as the image-up direction.
Pose3d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up);

}  // namespace bt
